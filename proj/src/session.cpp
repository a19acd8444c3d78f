#include "atma/session.hpp"

namespace atma {

FrameRecord make_frame_record(const WorldState& world, const EgoInputs& raw, const CameraSpec& camera) {
  const EgoInputs in = raw.clamped();
  const auto& ego = world.ego();
  FrameRecord r;
  r.i = world.frame;
  r.time_ms = world.time_ms();
  r.op = {in.brake, in.accel, ego.speed_mph};
  r.pos = compute_positions(world);
  r.quads = project_cuboids(world, camera);
  r.lane = ego.lane;
  r.lateral_offset_ft = ego.lateral_offset;
  r.lateral_ft = ego.y(world.road);
  r.steer = in.steer;
  r.indicator_left = in.indicator_left;
  r.indicator_right = in.indicator_right;
  return r;
}

}  // namespace atma
