#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "atma/gaze.hpp"
#include "atma/scenario.hpp"
#include "atma/session.hpp"

namespace atma {

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The accelerator never leaves its rest value, so no run was recorded.
class NoSessionError : public AnalysisError {
 public:
  using AnalysisError::AnalysisError;
};

class AlignmentError : public AnalysisError {
 public:
  using AnalysisError::AnalysisError;
};

// ---------------------------------------------------------------------------
// Trimming and alignment
// ---------------------------------------------------------------------------

struct AlignedSample {
  GazeSample gaze;
  std::int64_t frame = 0;        // matched simulation frame index
  std::size_t frame_offset = 0;  // index into SessionDataset::frames
  SampleLabel label = SampleLabel::unclassified;
  AreaFlags areas;
  ObjectFlags objects;
};

struct AlignmentStats {
  std::size_t gaze_total = 0;
  std::size_t outside_trim = 0;  // before start or after end
  std::size_t unmatched = 0;     // no frame within half a period
  std::size_t duplicates = 0;    // lost to a nearer sample on the same frame
  std::size_t matched = 0;
  double coverage = 0.0;  // gaze time span over trimmed frame span
};

struct SessionDataset {
  std::vector<FrameRecord> frames;  // trimmed, start..end inclusive
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;
  std::vector<AlignedSample> gaze;
  AlignmentStats stats;
  bool has_gaze = false;
  double brake_rest = 0.0;  // alpha_b estimated from the pre-start frames

  // Frame record for an absolute frame index inside the trimmed range.
  const FrameRecord& at(std::int64_t frame) const;
};

// Start: first frame whose accelerator input differs from the previous one.
// End: first frame attaining the minimum p_e at or after the start, or the
// last frame when `end_at_exit` is false (no position channel).
// Throws NoSessionError when the accelerator never moves.
std::pair<std::int64_t, std::int64_t> trim_bounds(std::span<const FrameRecord> sim, bool end_at_exit = true);

// Matches every gaze sample to the nearest trimmed frame within half a frame
// period; unmatched samples are dropped and counted. Throws AlignmentError
// when gaze is present but covers under half of the trimmed span.
SessionDataset trim_and_align(std::span<const FrameRecord> sim, std::span<const GazeSample> gaze,
                              bool end_at_exit = true);

struct AttributionParams {
  IvtParams ivt;
  ScreenGeometry screen;
  ScreenAreas areas;
};

// Labels the aligned samples with I-VT and computes A_i and M_i.
void attribute_gaze(SessionDataset& dataset, const AttributionParams& params);

// ---------------------------------------------------------------------------
// Brakes
// ---------------------------------------------------------------------------

inline constexpr double kHarshBrakeMphps = 10.648;

struct BrakeParams {
  double rest = 0.0;         // alpha_b
  double hysteresis = 0.02;  // delta, fraction of full pedal
  double harsh_mphps = kHarshBrakeMphps;
  double pedal_scale_mphps = 20.0;  // deceleration of a full pedal
};

struct BrakeEvent {
  std::int64_t start = 0;     // b
  std::int64_t duration = 0;  // q, frames above threshold
  bool harsh = false;         // speed-trace verdict when speed is known
  bool harsh_pedal = false;   // literal pedal-delta verdict
  std::optional<double> speed_rate_mphps;
  double pedal_rate_mphps = 0.0;
};

// Mode of the pedal values (rounded to 1e-3); 0 for an empty span.
double estimate_brake_rest(std::span<const double> pedal);

// Events are maximal runs with pedal > rest + hysteresis. `speed` may be
// empty; otherwise it is aligned with `pedal`. Frame numbers are
// `first_frame` + index.
std::vector<BrakeEvent> detect_brakes(std::span<const double> pedal, std::span<const double> speed,
                                      std::int64_t first_frame, const BrakeParams& params = {});

std::vector<BrakeEvent> detect_brakes(const SessionDataset& dataset, BrakeParams params = {});

// ---------------------------------------------------------------------------
// Lane changes and the passing phase
// ---------------------------------------------------------------------------

enum class LaneDirection { left, right };
const char* to_string(LaneDirection d);

struct LaneChange {
  std::int64_t start = 0;  // s
  std::int64_t end = 0;    // e
  LaneDirection direction = LaneDirection::left;
  int from_lane = 0;
  int to_lane = 0;
  bool truncated = false;  // run ended before the ego settled
};

struct LaneChangeParams {
  double lane_width_ft = 12.0;
  int lanes = 2;
  double dead_band_ft = 0.5;
  double velocity_threshold_ftps = 1.0;  // departure and settling
  double onset_velocity_ftps = 0.3;      // backtracking to motion onset
};

struct LaneChangeDetection {
  std::vector<LaneChange> changes;
  std::vector<LaneChange> aborts;  // left the lane and came back
};

// `lateral_ft` is the absolute lateral position (lane center + offset,
// left positive) sampled at 60 Hz starting at `first_frame`.
LaneChangeDetection detect_lane_changes(std::span<const double> lateral_ft, std::int64_t first_frame,
                                        const LaneChangeParams& params = {});
LaneChangeDetection detect_lane_changes(const SessionDataset& dataset, const LaneChangeParams& params = {});

struct PassingPhase {
  std::int64_t t_s = -1;
  std::int64_t t_e = -1;
  bool complete = false;

  bool contains(std::int64_t frame) const { return complete && frame >= t_s && frame <= t_e; }
};

// t_s = latest change start with p_f > 0; t_e = earliest change end with
// p_l < 0. Incomplete when either set is empty or t_s >= t_e.
PassingPhase passing_phase(std::span<const LaneChange> changes, const SessionDataset& dataset);

// ---------------------------------------------------------------------------
// Speed/position correlation
// ---------------------------------------------------------------------------

inline constexpr int kSegmentsPerSide = 10;
inline constexpr int kSegmentCount = 2 * kSegmentsPerSide + 1;
inline constexpr double kSegmentFt = 100.0;

struct SegmentCorrelation {
  int segment = 0;  // -10 (900-1000 ft behind follower) .. 0 (between) .. +10
  std::optional<double> r;
  std::size_t sample_count = 0;
};

// Undefined for n < 3 or a (numerically) zero variance on either side.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// -k for p_f in (100(k-1), 100k], 0 between the trucks, +k for -p_l in
// (100(k-1), 100k]; nullopt beyond 1000 ft.
std::optional<int> correlation_segment(const Positions& p);

std::array<SegmentCorrelation, kSegmentCount> segment_correlations(std::span<const FrameRecord> frames);

// ---------------------------------------------------------------------------
// Fixation proportions by distance
// ---------------------------------------------------------------------------

enum class AtmaObject { follower, follower_sign, lead, lead_sign };
const char* to_string(AtmaObject o);

inline constexpr int kProportionBins = 6;

// Distance used to bin an object's attention: follower parts use p_f; lead
// parts use the gap from the ego front to the lead truck's rear.
double approach_distance(AtmaObject object, const Positions& p);

// Per 100-ft bin (0-100, ..., 500-600 ft): fixation-labeled samples on the
// object over all fixation-labeled samples in the bin; nullopt when the bin
// holds no fixation samples.
std::array<std::optional<double>, kProportionBins> session_proportions(const SessionDataset& dataset,
                                                                       AtmaObject object);

struct ProportionEstimate {
  int bin = 0;
  std::size_t sessions = 0;
  double mean = 0.0;
  double half_width = 0.0;  // 1.96 standard errors
};

// Mean and 95% interval across sessions, skipping sessions with an empty bin.
std::array<ProportionEstimate, kProportionBins> cohort_proportions(
    std::span<const std::array<std::optional<double>, kProportionBins>> sessions);

// ---------------------------------------------------------------------------
// Pupil diameters
// ---------------------------------------------------------------------------

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 0.5;  // one-sided, H1: mean(a) > mean(b)
  double mean_a = 0.0;
  double mean_b = 0.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
};

// Unequal-variance two-sample test; nullopt unless both groups have n >= 2.
std::optional<WelchResult> welch_one_sided(std::span<const double> a, std::span<const double> b);

struct EyeTest {
  bool available = false;
  WelchResult result;
};

struct PupilTestResult {
  EyeTest left;
  EyeTest right;
};

PupilTestResult pupil_ttest(const SessionDataset& dataset, const PassingPhase& phase);

// ---------------------------------------------------------------------------
// Gaze shifts between the trucks
// ---------------------------------------------------------------------------

enum class Truck { follower, lead };

struct TruckRun {
  Truck truck = Truck::follower;
  std::size_t first = 0;  // sample indices, inclusive
  std::size_t last = 0;
  bool linked = true;  // adjacent to the previous run within the gap limit
};

struct GazeShiftResult {
  std::vector<TruckRun> runs;
  std::size_t shifts = 0;
  bool any_shift = false;
  std::string pattern;  // e.g. "FT>LT>FT"
};

// Sign hits count toward their truck; samples flagged on both trucks are
// ambiguous and skipped like non-truck samples. Runs separated by more than
// `max_gap` non-truck samples are not adjacent.
GazeShiftResult gaze_shift_patterns(std::span<const ObjectFlags> flags,
                                    std::optional<std::size_t> max_gap = std::nullopt);

// ---------------------------------------------------------------------------
// Fixation heat maps
// ---------------------------------------------------------------------------

struct HeatGrid {
  int rows = 3;
  int cols = 3;
  std::vector<double> percent;  // row-major, top row first
  double total_ms = 0.0;

  double at(int row, int col) const { return percent[static_cast<std::size_t>(row * cols + col)]; }
};

// Share of total fixation duration per cell, in percent. With `region`, only
// fixations centered inside it count and the grid subdivides the region.
HeatGrid fixation_heatmap(std::span<const Fixation> fixations, int rows = 3, int cols = 3,
                          const std::optional<Rect>& region = std::nullopt);

struct PhaseHeatmaps {
  HeatGrid passing;
  HeatGrid non_passing;
};

// Fixations come from group_fixations() over dataset.gaze; each is assigned
// to the phase containing its middle sample's frame.
PhaseHeatmaps fixation_heatmaps_by_phase(const SessionDataset& dataset, std::span<const Fixation> fixations,
                                         const PassingPhase& phase, int rows = 3, int cols = 3,
                                         const std::optional<Rect>& region = std::nullopt);

// ---------------------------------------------------------------------------
// Distance distributions of brakes and lane changes
// ---------------------------------------------------------------------------

struct BrakeHistogram {
  double bin_ft = 100.0;
  double lo_ft = -1000.0;
  double hi_ft = 2000.0;
  std::vector<std::size_t> all;  // bin k covers [lo + k*bin, lo + (k+1)*bin)
  std::vector<std::size_t> harsh;
  std::size_t below = 0;
  std::size_t above = 0;
  std::size_t below_harsh = 0;
  std::size_t above_harsh = 0;

  BrakeHistogram();
  std::size_t bins() const { return all.size(); }
  double bin_lo(std::size_t k) const { return lo_ft + static_cast<double>(k) * bin_ft; }
  void add(double p_f, bool is_harsh);
  void merge(const BrakeHistogram& other);
  std::size_t total() const;
};

// Each brake is binned by p_f at its start frame.
BrakeHistogram brake_distance_histogram(std::span<const BrakeEvent> brakes, const SessionDataset& dataset);

// p_f at the start of the change that begins the passing phase; nullopt
// when the pass is incomplete.
std::optional<double> passing_change_distance(std::span<const LaneChange> changes, const PassingPhase& phase,
                                              const SessionDataset& dataset);

struct DistanceStats {
  std::size_t n = 0;
  std::size_t excluded = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

// Linear-interpolation quantile (Hyndman-Fan type 7) of sorted data.
double quantile_sorted(std::span<const double> sorted, double q);

DistanceStats distance_stats(std::span<const std::optional<double>> per_session);

}  // namespace atma
