#include "atma/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace atma {

std::string to_string(TrafficVolume v) { return v == TrafficVolume::low ? "low" : "high"; }

TrafficVolume parse_traffic_volume(const std::string& s) {
  if (s == "low") return TrafficVolume::low;
  if (s == "high") return TrafficVolume::high;
  throw ConfigError("unknown traffic_volume '" + s + "' (expected low or high)");
}

void RoadSpec::validate() const {
  if (!(length_ft > 0.0)) throw ConfigError("road length must be positive");
  if (lanes_per_direction < 2) throw ConfigError("road needs at least two lanes per direction");
  if (!(lane_width_ft > 0.0)) throw ConfigError("lane width must be positive");
  if (!(exit_position_ft > 0.0 && exit_position_ft <= length_ft))
    throw ConfigError("exit position must lie in (0, length]");
}

int RoadSpec::nearest_lane(double y) const {
  const int lane = static_cast<int>(std::lround(y / lane_width_ft));
  return std::clamp(lane, 0, lanes_per_direction - 1);
}

void ScenarioConfig::validate() const {
  if (!(atma_gap_ft > 0.0)) throw ConfigError("atma_gap must be positive");
  if (!(ego_start_behind_atma_ft > atma_gap_ft))
    throw ConfigError("ego_start_behind_atma must exceed atma_gap");
  if (npv_mean_spacing_ft < 0.0) throw ConfigError("npv_mean_spacing must be non-negative");
  if (npv_spacing_jitter < 0.0 || npv_spacing_jitter >= 1.0)
    throw ConfigError("npv_spacing_jitter must lie in [0, 1)");
  if (!(atma_speed_mph > 0.0)) throw ConfigError("atma_speed must be positive");
  if (ego_initial_speed_mph < 0.0) throw ConfigError("ego_initial_speed must be non-negative");
}

double ScenarioConfig::effective_npv_spacing() const {
  if (npv_mean_spacing_ft > 0.0) return npv_mean_spacing_ft;
  return traffic_volume == TrafficVolume::low ? 650.0 : 160.0;
}

double ScenarioConfig::effective_npv_speed() const {
  if (npv_speed_mph > 0.0) return npv_speed_mph;
  return traffic_volume == TrafficVolume::low ? 62.0 : 50.0;
}

EgoInputs EgoInputs::clamped() const {
  EgoInputs out = *this;
  auto fix = [](double v, double lo, double hi) { return std::isfinite(v) ? std::clamp(v, lo, hi) : 0.0; };
  out.accel = fix(accel, 0.0, 1.0);
  out.brake = fix(brake, 0.0, 1.0);
  out.steer = fix(steer, -1.0, 1.0);
  return out;
}

namespace {

template <typename Vehicles>
auto& find_kind(Vehicles& vehicles, VehicleKind kind, const char* name) {
  for (auto& v : vehicles)
    if (v.kind == kind) return v;
  throw StructuralError(std::string("world has no ") + name);
}

}  // namespace

const VehicleState& WorldState::ego() const { return find_kind(vehicles, VehicleKind::ego, "ego vehicle"); }
const VehicleState& WorldState::follower() const {
  return find_kind(vehicles, VehicleKind::follower_truck, "follower truck");
}
const VehicleState& WorldState::lead() const { return find_kind(vehicles, VehicleKind::lead_truck, "lead truck"); }
VehicleState& WorldState::ego() { return find_kind(vehicles, VehicleKind::ego, "ego vehicle"); }

WorldState spawn_scenario(const ScenarioConfig& config, const RoadSpec& road, const DynamicsSpec& dynamics) {
  config.validate();
  road.validate();
  if (config.atma_speed_mph > dynamics.atma_max_speed_mph)
    throw ConfigError("atma_speed exceeds the ATMA speed cap");

  WorldState w;
  w.road = road;
  w.dynamics = dynamics;
  w.config = config;
  w.rng_seed = config.seed;

  int next_id = 0;
  auto add = [&](VehicleKind kind, double s, int lane, double length, double width, double speed) {
    VehicleState v;
    v.id = next_id++;
    v.kind = kind;
    v.s = s;
    v.lane = lane;
    v.target_lane = lane;
    v.length_ft = length;
    v.width_ft = width;
    v.speed_mph = speed;
    v.desired_speed_mph = speed;
    w.vehicles.push_back(v);
  };

  // Ego front at s = 0 on the right lane; ATMA ahead on the same lane.
  add(VehicleKind::ego, 0.0, 0, dims::kCarLengthFt, dims::kCarWidthFt, config.ego_initial_speed_mph);
  const double follower_front = config.ego_start_behind_atma_ft + dims::kTruckLengthFt;
  add(VehicleKind::follower_truck, follower_front, 0, dims::kTruckLengthFt, dims::kTruckWidthFt,
      config.atma_speed_mph);
  add(VehicleKind::lead_truck, follower_front + config.atma_gap_ft + dims::kTruckLengthFt, 0, dims::kTruckLengthFt,
      dims::kTruckWidthFt, config.atma_speed_mph);

  const double npv_speed = config.effective_npv_speed();
  add(VehicleKind::npv, -(dims::kCarLengthFt + 60.0), 0, dims::kNpvLengthFt, dims::kNpvWidthFt,
      config.ego_initial_speed_mph);
  w.vehicles.back().desired_speed_mph = npv_speed;

  const double spacing = config.effective_npv_spacing();
  const double min_gap = spacing * (1.0 - config.npv_spacing_jitter);
  if (min_gap < dims::kNpvLengthFt + dynamics.npv_min_gap_ft)
    throw ConfigError("npv spacing " + std::to_string(spacing) + " ft cannot fit vehicles without overlap");

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double begin = -1500.0;
  const double end = road.length_ft + 500.0;
  const int left_lane = 1;
  for (double s = begin + unit(rng) * spacing; s < end;
       s += spacing * (1.0 + config.npv_spacing_jitter * (2.0 * unit(rng) - 1.0))) {
    add(VehicleKind::npv, s, left_lane, dims::kNpvLengthFt, dims::kNpvWidthFt, npv_speed);
  }
  return w;
}

namespace {

double approach(double value, double target, double max_step) {
  if (value < target) return std::min(target, value + max_step);
  return std::max(target, value - max_step);
}

bool lateral_overlap(const VehicleState& a, const VehicleState& b, const RoadSpec& road) {
  return std::abs(a.y(road) - b.y(road)) < 0.5 * (a.width_ft + b.width_ft);
}

void set_lateral(VehicleState& v, const RoadSpec& road, double y) {
  const double lo = -0.5 * road.lane_width_ft;
  const double hi = road.lane_center(road.lanes_per_direction - 1) + 0.5 * road.lane_width_ft;
  y = std::clamp(y, lo, hi);
  v.lane = road.nearest_lane(y);
  v.lateral_offset = y - road.lane_center(v.lane);
}

}  // namespace

WorldState step_frame(const WorldState& world, const EgoInputs& raw_inputs) {
  const EgoInputs in = raw_inputs.clamped();
  const auto& road = world.road;
  const auto& dyn = world.dynamics;
  WorldState next = world;
  next.frame = world.frame + 1;

  const auto& old = world.vehicles;
  auto& veh = next.vehicles;

  std::vector<std::size_t> order(old.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return old[a].s < old[b].s || (old[a].s == old[b].s && a < b);
  });
  std::vector<std::size_t> rank(old.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;

  const VehicleState* lead_old = nullptr;
  for (const auto& v : old)
    if (v.kind == VehicleKind::lead_truck) lead_old = &v;

  // Speeds from the previous state, then positions with the new speeds.
  for (std::size_t i = 0; i < old.size(); ++i) {
    const VehicleState& o = old[i];
    VehicleState& v = veh[i];
    switch (o.kind) {
      case VehicleKind::ego: {
        v.accel_input = in.accel;
        v.brake_input = in.brake;
        v.indicator_left = in.indicator_left;
        v.indicator_right = in.indicator_right;
        const double a = dyn.ego_accel_max_mphps * in.accel - dyn.ego_brake_max_mphps * in.brake - dyn.drag(o.speed_mph);
        v.speed_mph = std::clamp(o.speed_mph + a * kDt, 0.0, road.speed_limit_mph);
        break;
      }
      case VehicleKind::lead_truck: {
        const double target = std::min(o.desired_speed_mph, dyn.atma_max_speed_mph);
        v.speed_mph = std::clamp(approach(o.speed_mph, target, dyn.atma_accel_mphps * kDt), 0.0,
                                 dyn.atma_max_speed_mph);
        break;
      }
      case VehicleKind::follower_truck: {
        double cmd = o.speed_mph;
        if (lead_old != nullptr) {
          const double gap = lead_old->rear() - o.s;
          cmd = lead_old->speed_mph + fps_to_mph(dyn.atma_gap_gain * (gap - world.config.atma_gap_ft));
        }
        cmd = std::clamp(cmd, 0.0, dyn.atma_max_speed_mph);
        v.speed_mph = std::clamp(approach(o.speed_mph, cmd, dyn.atma_accel_mphps * kDt), 0.0,
                                 dyn.atma_max_speed_mph);
        break;
      }
      case VehicleKind::npv: {
        const VehicleState* leader = nullptr;
        for (std::size_t r = rank[i] + 1; r < order.size(); ++r) {
          const VehicleState& c = old[order[r]];
          if (lateral_overlap(o, c, road)) {
            leader = &c;
            break;
          }
        }
        double target = std::min(o.desired_speed_mph, road.speed_limit_mph);
        double gap = 0.0;
        if (leader != nullptr) {
          gap = leader->rear() - o.s;
          const double safe = leader->speed_mph + fps_to_mph((gap - dyn.npv_min_gap_ft) / dyn.npv_time_headway_s);
          target = std::min(target, std::max(0.0, safe));
        }
        double speed = o.speed_mph + std::clamp(target - o.speed_mph, -dyn.npv_brake_mphps * kDt,
                                                dyn.npv_accel_mphps * kDt);
        if (leader != nullptr && gap < dyn.npv_min_gap_ft) speed = std::min(speed, leader->speed_mph);
        v.speed_mph = std::clamp(speed, 0.0, road.speed_limit_mph);
        break;
      }
    }
    v.s = o.s + mph_to_fps(v.speed_mph) * kDt;
  }

  // Lateral: only the ego changes lanes.
  VehicleState& ego = next.ego();
  const double y = ego.y(road);
  const double max_step = dyn.lateral_rate_ftps * kDt;
  if (in.steer != 0.0) {
    set_lateral(ego, road, y - in.steer * max_step);
    ego.target_lane = ego.lane;
  } else {
    if (in.target_lane) ego.target_lane = std::clamp(*in.target_lane, 0, road.lanes_per_direction - 1);
    set_lateral(ego, road, approach(y, road.lane_center(ego.target_lane), max_step));
  }
  return next;
}

Positions compute_positions(const WorldState& world) {
  const auto& ego = world.ego();
  const auto& follower = world.follower();
  const auto& lead = world.lead();
  Positions p;
  p.p_e = std::max(0.0, world.road.exit_position_ft - ego.s);
  p.p_f = follower.rear() - ego.s;
  p.p_l = lead.s - ego.rear();
  return p;
}

void CameraSpec::validate() const {
  if (!(horizontal_fov_deg > 0.0 && horizontal_fov_deg < 180.0))
    throw ConfigError("camera horizontal_fov must lie in (0, 180) degrees");
  if (!(aspect > 0.0)) throw ConfigError("camera aspect must be positive");
  if (!(near_ft > 0.0)) throw ConfigError("camera near plane must be positive");
}

double CameraSpec::focal_x() const {
  return 0.5 / std::tan(0.5 * horizontal_fov_deg * std::numbers::pi / 180.0);
}

std::array<double, 3> Cuboid::vertex(int k) const {
  return {(k & 1) ? s_max : s_min, (k & 2) ? y_max : y_min, (k & 4) ? z_max : z_min};
}

Cuboid truck_cuboid(const VehicleState& truck, const RoadSpec& road) {
  const double yc = truck.y(road);
  return {truck.rear(), truck.s, yc - 0.5 * truck.width_ft, yc + 0.5 * truck.width_ft, 0.0, dims::kTruckHeightFt};
}

// Arrow board flush with the rear face, inside the truck body.
Cuboid sign_cuboid(const VehicleState& truck, const RoadSpec& road) {
  const double yc = truck.y(road);
  return {truck.rear(),
          truck.rear() + dims::kSignDepthFt,
          yc - 0.5 * dims::kSignWidthFt,
          yc + 0.5 * dims::kSignWidthFt,
          dims::kSignBottomFt,
          dims::kSignBottomFt + dims::kSignHeightFt};
}

ScreenVertex project_point(const WorldState& world, const CameraSpec& camera, const std::array<double, 3>& p) {
  const auto& ego = world.ego();
  const double forward = p[0] - (ego.s - camera.eye_back_ft);
  const double right = -(p[1] - ego.y(world.road));
  const double up = p[2] - camera.eye_up_ft;
  ScreenVertex v;
  v.visible = forward > camera.near_ft;
  if (v.visible) {
    v.x = 0.5 + camera.focal_x() * right / forward;
    v.y = 0.5 - camera.focal_y() * up / forward;
  }
  return v;
}

ScreenQuad project_cuboid(const WorldState& world, const CameraSpec& camera, const Cuboid& c) {
  ScreenQuad q{};
  for (int k = 0; k < 8; ++k) q[k] = project_point(world, camera, c.vertex(k));
  return q;
}

ScreenQuadSet project_cuboids(const WorldState& world, const CameraSpec& camera) {
  const auto& f = world.follower();
  const auto& l = world.lead();
  const auto& road = world.road;
  return {project_cuboid(world, camera, truck_cuboid(f, road)), project_cuboid(world, camera, truck_cuboid(l, road)),
          project_cuboid(world, camera, sign_cuboid(f, road)), project_cuboid(world, camera, sign_cuboid(l, road))};
}

}  // namespace atma
