#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "atma/config.hpp"
#include "atma/gaze.hpp"
#include "atma/scenario.hpp"
#include "atma/session.hpp"

namespace atma {

// ---------------------------------------------------------------------------
// Scripted drivers
// ---------------------------------------------------------------------------

// What a scripted driver sees each frame.
struct Observation {
  std::int64_t frame = 0;
  Positions pos;
  double speed_mph = 0.0;
  int lane = 0;
};

Observation observe(const WorldState& world);

enum class TriggerVar { frame, time_s, p_e, p_f, p_l, speed };
enum class CompareOp { lt, le, gt, ge };

struct Trigger {
  TriggerVar var = TriggerVar::frame;
  CompareOp op = CompareOp::ge;
  double value = 0.0;

  bool eval(const Observation& obs) const;
};

// Fields left empty keep their previous value.
struct DriverAction {
  std::optional<double> accel;
  std::optional<double> brake;
  std::optional<double> cruise_mph;  // accelerator-only speed hold
  std::optional<int> lane_shift;     // +1 left, -1 right
  std::optional<int> lane_absolute;
  std::optional<bool> indicator_left;
  std::optional<bool> indicator_right;
};

struct ScriptStep {
  Trigger trigger;
  DriverAction action;
};

// Ordered steps. A step becomes eligible once all earlier steps have fired
// and fires at the first frame its trigger holds; several consecutive steps
// may fire in the same frame.
//
// Text form, one step per line ('#' comments):
//   when <frame|time|p_e|p_f|p_l|speed> <op> <value> : <action>...
// with actions `accel X`, `brake X`, `coast`, `cruise MPH`,
// `lane left|right|N`, `indicator left|right|off`.
struct DriverScript {
  std::vector<ScriptStep> steps;

  void validate() const;
  static DriverScript parse(std::string_view text);
  std::string to_text() const;
};

DriverScript load_driver_script(const std::string& path);

struct FiredStep {
  std::size_t step = 0;
  std::int64_t frame = 0;
};

class ScriptedDriver {
 public:
  ScriptedDriver(DriverScript script, DynamicsSpec dynamics = {});

  // Fires any newly satisfied steps and returns the inputs they mandate;
  // coasting in the current lane when nothing has fired.
  EgoInputs step(const Observation& obs);

  const std::vector<FiredStep>& fired() const { return fired_; }
  const DriverScript& script() const { return script_; }

 private:
  DriverScript script_;
  DynamicsSpec dynamics_;
  std::size_t next_ = 0;
  double accel_ = 0.0;
  double brake_ = 0.0;
  std::optional<double> cruise_;
  std::optional<int> target_lane_;
  bool indicator_left_ = false;
  bool indicator_right_ = false;
  std::vector<FiredStep> fired_;
};

// ---------------------------------------------------------------------------
// Synthetic gaze
// ---------------------------------------------------------------------------

enum class GazeTarget {
  follower,
  lead,
  follower_sign,
  lead_sign,
  speedometer,
  tachometer,
  left_mirror,
  right_mirror,
  rear_mirror,
  road
};

const char* to_string(GazeTarget t);
GazeTarget parse_gaze_target(std::string_view s);
bool is_truck_target(GazeTarget t);

struct DwellSegment {
  GazeTarget target = GazeTarget::road;
  double duration_ms = 500.0;
  std::optional<double> noise_std;
};

// Pupil diameters in mm. Magnitudes are placeholders; only the passing-phase
// shift matters to the analyses.
struct PupilModel {
  double base_left_mm = 3.0;
  double base_right_mm = 3.1;
  double passing_increment_mm = 0.3;
  double noise_std_mm = 0.1;
  double left_dropout = 0.0;  // per-sample probability the eye is lost
  double right_dropout = 0.0;
};

// Text form: `key = value` settings (noise_std, repeat, road_x, road_y and
// the pupil_* fields) plus `dwell <target> <ms> [noise]` lines.
struct GazeProfile {
  std::vector<DwellSegment> dwells;
  double noise_std = 0.0;  // normalized screen units
  PupilModel pupil;
  bool repeat = true;
  Point2 road_point{0.5, 0.42};

  void validate() const;
  static GazeProfile parse(std::string_view text);
  std::string to_text() const;
};

GazeProfile load_gaze_profile(const std::string& path);

// Ground truth for one synthesized sample.
struct GazeTruth {
  GazeTarget target = GazeTarget::road;
  SampleLabel label = SampleLabel::fixation_point;
  bool valid = false;
};

// Per-frame gaze generator. Within a dwell the gaze rests on the target's
// screen centroid plus Gaussian noise; between dwells it sweeps linearly to
// the next target over two samples, the second landing on the target.
class GazeSynthesizer {
 public:
  GazeSynthesizer(GazeProfile profile, std::uint64_t seed);

  GazeSample step(const ScreenQuadSet& quads, const ScreenAreas& areas, std::int64_t frame, bool passing);

  const GazeTruth& last_truth() const { return truth_; }

  static constexpr int kSweepSamples = 2;

 private:
  std::optional<Point2> resolve(GazeTarget target, const ScreenQuadSet& quads, const ScreenAreas& areas) const;
  void advance();

  GazeProfile profile_;
  std::mt19937_64 rng_;
  std::size_t segment_ = 0;
  std::int64_t hold_left_ = 0;
  int sweep_left_ = 0;
  bool finished_ = false;
  std::optional<Point2> last_point_;
  std::optional<Point2> sweep_from_;
  GazeTruth truth_;
};

// ---------------------------------------------------------------------------
// Scripted sessions and their ground truth
// ---------------------------------------------------------------------------

struct LedgerBrake {
  std::int64_t start = 0;
  std::int64_t end = 0;  // exclusive
  double level = 0.0;
};

struct LedgerLaneChange {
  std::int64_t intent = 0;  // frame the driver asked for the change
  std::int64_t start = 0;   // first frame showing lateral motion
  std::int64_t end = 0;     // frame the ego settled on the target lane
  int from = 0;
  int to = 0;
  bool completed = false;
};

struct LedgerDwell {
  GazeTarget target = GazeTarget::road;
  std::int64_t start = 0;  // first hold frame
  std::int64_t end = 0;    // last hold frame, inclusive
};

struct GroundTruthLedger {
  std::vector<LedgerBrake> brakes;
  std::vector<LedgerLaneChange> lane_changes;
  std::vector<LedgerDwell> dwells;
  std::vector<FiredStep> fired;
  std::vector<GazeTruth> gaze_truth;  // one per gaze sample
};

struct ScriptedRun {
  SimulationConfig config;
  std::vector<FrameRecord> frames;
  std::vector<GazeSample> gaze;
  GroundTruthLedger ledger;
  bool reached_exit = false;
};

struct RunOptions {
  double gaze_time_offset_ms = 0.0;
};

// Runs the scenario with the scripted driver until the ego passes the exit
// (plus the configured tail) or max_frames is reached. Gaze is synthesized
// only when a profile is given.
ScriptedRun run_scripted_session(const SimulationConfig& config, const DriverScript& script,
                                 const std::optional<GazeProfile>& profile, const RunOptions& options = {});

}  // namespace atma
