#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "atma/gaze.hpp"
#include "atma/scenario.hpp"

namespace atma {

// O_i
struct Operation {
  double brake = 0.0;      // o_b, [0, 1]
  double accel = 0.0;      // o_a, [0, 1]
  double speed_mph = 0.0;  // o_v
};

// One simulation frame. Inputs are the ones applied during the step out of
// this frame; speed and positions are the state at this frame.
struct FrameRecord {
  std::int64_t i = 0;
  double time_ms = 0.0;
  Operation op;
  Positions pos;
  ScreenQuadSet quads;
  // Channels beyond O/P/D, carried for lane-change detection and replay.
  int lane = 0;
  double lateral_offset_ft = 0.0;
  double lateral_ft = 0.0;  // absolute, left positive
  double steer = 0.0;
  bool indicator_left = false;
  bool indicator_right = false;
};

FrameRecord make_frame_record(const WorldState& world, const EgoInputs& inputs, const CameraSpec& camera);

}  // namespace atma
