#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "atma/measures.hpp"
#include "atma/session_io.hpp"

namespace atma {

// Measures selectable with --measure.
struct MeasureFilter {
  bool brakes = true;
  bool lane_changes = true;
  bool passing = true;
  bool correlation = true;
  bool proportions = true;
  bool pupils = true;
  bool shifts = true;
  bool heatmaps = true;
  bool distances = true;

  static MeasureFilter all() { return {}; }
  // Comma-separated names; throws ConfigError on an unknown name.
  static MeasureFilter parse(const std::string& list);
};

struct AnalysisOptions {
  MeasureFilter filter;
  BrakeParams brake;
  LaneChangeParams lane;
  std::optional<std::size_t> shift_max_gap;
  int heat_rows = 3;
  int heat_cols = 3;
};

// Manual lane-change labels. CSV with a header row naming `start` and `end`
// (frame indices) and optionally `direction` (left/right). When given, they
// replace automatic detection for that session.
std::vector<LaneChange> parse_lane_annotations(std::string_view csv, const SessionData& session);

// Everything computed for one session. Fields belonging to a measure that
// was filtered out or whose channels are missing stay empty; `absent` names
// them with the reason.
struct SessionAnalysis {
  std::string name;
  std::string volume;
  std::string gaze_source;
  Channels channels;
  std::optional<std::string> error;  // session could not be analyzed at all
  bool manual_lane_changes = false;
  std::map<std::string, std::string> absent;

  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;
  std::size_t frame_count = 0;
  AlignmentStats alignment;
  double brake_rest = 0.0;

  std::vector<BrakeEvent> brakes;
  std::vector<double> brake_p_f;  // p_f at each brake start
  LaneChangeDetection lanes;
  std::vector<std::pair<double, double>> lane_p;  // (p_f at start, p_l at end)
  PassingPhase phase;
  std::array<SegmentCorrelation, kSegmentCount> correlation{};
  std::map<AtmaObject, std::array<std::optional<double>, kProportionBins>> proportions;
  PupilTestResult pupils;
  GazeShiftResult shifts;
  std::size_t fixation_count = 0;
  HeatGrid heat_all;
  PhaseHeatmaps heat_phase;
  BrakeHistogram brake_hist;
  std::optional<double> change_distance;
};

SessionAnalysis analyze_session(const SessionData& session, const std::string& name,
                                const AnalysisOptions& options = {},
                                const std::optional<std::vector<LaneChange>>& manual_changes = std::nullopt);

// Correlation frequency grid: rows are r-value bins over [-1, 1], columns
// the 21 distance segments.
inline constexpr int kCorrelationRBins = 10;

struct CohortReport {
  std::size_t sessions = 0;
  std::size_t analyzed = 0;
  std::size_t complete_passes = 0;
  std::size_t sessions_with_shift = 0;
  std::map<AtmaObject, std::array<ProportionEstimate, kProportionBins>> proportions;
  std::array<std::array<std::size_t, kSegmentCount>, kCorrelationRBins> correlation_grid{};
  std::array<std::size_t, kSegmentCount> correlation_undefined{};
  BrakeHistogram brake_hist;
  std::map<std::string, BrakeHistogram> brake_hist_by_volume;
  DistanceStats change_distance;
  std::map<std::string, DistanceStats> change_distance_by_volume;
  HeatGrid heat_passing;
  HeatGrid heat_non_passing;
  std::size_t pupil_left_significant = 0;  // p < 0.05
  std::size_t pupil_right_significant = 0;
};

CohortReport summarize_cohort(const std::vector<SessionAnalysis>& sessions, const AnalysisOptions& options = {});

// Consistency checks over a finished analysis; each entry describes one
// violation.
std::vector<std::string> check_invariants(const SessionAnalysis& a);
std::vector<std::string> check_invariants(const CohortReport& c);

// CSV tables (first row names, second row units) and report.json.
// Returns the list of files written.
std::vector<std::string> write_report_bundle(const std::string& out_dir, const std::vector<SessionAnalysis>& sessions,
                                             const CohortReport& cohort, const AnalysisOptions& options = {});

// RFC 4180 field quoting.
std::string csv_field(const std::string& s);
std::string csv_row(const std::vector<std::string>& cells);

// Human-readable summary of a bundle's report.json.
std::string render_report(const std::string& report_json_text);

}  // namespace atma
