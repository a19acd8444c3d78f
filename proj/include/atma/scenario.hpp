#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "atma/units.hpp"

namespace atma {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class VehicleKind { ego, follower_truck, lead_truck, npv };
enum class TrafficVolume { low, high };

std::string to_string(TrafficVolume v);
TrafficVolume parse_traffic_volume(const std::string& s);

// Straight divided highway, one direction modeled. Lane 0 is the right lane,
// lane indices increase to the left. Lateral coordinate y points left.
struct RoadSpec {
  double length_ft = 11616.0;  // 2.2 mi
  int lanes_per_direction = 2;
  double lane_width_ft = 12.0;
  double speed_limit_mph = 65.0;
  double exit_position_ft = 11000.0;

  void validate() const;
  double lane_center(int lane) const { return lane * lane_width_ft; }
  int nearest_lane(double y) const;
};

// Point-mass longitudinal model and bounded-rate lateral model parameters.
struct DynamicsSpec {
  double ego_accel_max_mphps = 8.0;   // full accelerator
  double ego_brake_max_mphps = 20.0;  // full brake
  double drag_coeff = 3.0e-4;         // mph/s per mph^2
  double lateral_rate_ftps = 6.0;
  double atma_max_speed_mph = 15.0;
  double atma_accel_mphps = 3.0;
  double atma_gap_gain = 0.5;  // 1/s, follower gap servo
  double npv_accel_mphps = 6.0;
  double npv_brake_mphps = 20.0;
  double npv_min_gap_ft = 20.0;
  double npv_time_headway_s = 1.2;

  double drag(double speed_mph) const { return drag_coeff * speed_mph * speed_mph; }
};

struct ScenarioConfig {
  TrafficVolume traffic_volume = TrafficVolume::low;
  double atma_gap_ft = 100.0;
  double ego_start_behind_atma_ft = 1800.0;
  double npv_mean_spacing_ft = 0.0;  // 0 selects the volume default
  double npv_spacing_jitter = 0.25;  // uniform +/- fraction of the mean
  double npv_speed_mph = 0.0;        // 0 selects the volume default
  double atma_speed_mph = 15.0;
  double ego_initial_speed_mph = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
  double effective_npv_spacing() const;
  double effective_npv_speed() const;
};

// Body dimensions. The source scenario does not publish these; they are
// representative values for a work-zone truck, an arrow board and a sedan.
namespace dims {
inline constexpr double kTruckLengthFt = 30.0;
inline constexpr double kTruckWidthFt = 8.5;
inline constexpr double kTruckHeightFt = 11.0;
inline constexpr double kSignWidthFt = 6.0;
inline constexpr double kSignHeightFt = 4.0;
inline constexpr double kSignDepthFt = 0.5;
inline constexpr double kSignBottomFt = 6.5;
inline constexpr double kCarLengthFt = 15.5;
inline constexpr double kCarWidthFt = 6.2;
inline constexpr double kNpvLengthFt = 15.0;
inline constexpr double kNpvWidthFt = 6.0;
}  // namespace dims

struct VehicleState {
  int id = 0;
  VehicleKind kind = VehicleKind::npv;
  double s = 0.0;  // front, ft along road
  int lane = 0;
  double lateral_offset = 0.0;  // ft from lane center, positive left
  double speed_mph = 0.0;
  double length_ft = dims::kNpvLengthFt;
  double width_ft = dims::kNpvWidthFt;
  double accel_input = 0.0;
  double brake_input = 0.0;
  int target_lane = 0;
  double desired_speed_mph = 0.0;
  bool indicator_left = false;
  bool indicator_right = false;

  double rear() const { return s - length_ft; }
  double y(const RoadSpec& road) const { return road.lane_center(lane) + lateral_offset; }
};

struct EgoInputs {
  double accel = 0.0;
  double brake = 0.0;
  double steer = 0.0;  // live mode only, -1 (left) .. 1 (right)
  std::optional<int> target_lane;
  bool indicator_left = false;
  bool indicator_right = false;

  EgoInputs clamped() const;
};

struct WorldState {
  std::int64_t frame = 0;
  RoadSpec road;
  DynamicsSpec dynamics;
  ScenarioConfig config;
  std::vector<VehicleState> vehicles;
  std::uint64_t rng_seed = 0;

  double time_ms() const { return FrameClock::time_ms(frame); }

  const VehicleState& ego() const;
  const VehicleState& follower() const;
  const VehicleState& lead() const;
  VehicleState& ego();
};

// P_i: ego relative to the exit and to both ATMA trucks, ft.
struct Positions {
  double p_e = 0.0;  // exit - ego front, floored at 0
  double p_f = 0.0;  // follower rear - ego front, > 0 when follower ahead
  double p_l = 0.0;  // lead front - ego rear, > 0 when lead ahead
};

struct CameraSpec {
  double eye_back_ft = 1.5;  // behind the ego front
  double eye_up_ft = 4.0;
  double horizontal_fov_deg = 60.0;
  double aspect = 16.0 / 9.0;  // screen width / height
  double near_ft = 0.1;

  void validate() const;
  double focal_x() const;
  double focal_y() const { return focal_x() * aspect; }
};

struct ScreenVertex {
  double x = 0.0;
  double y = 0.0;
  bool visible = false;
};

using ScreenQuad = std::array<ScreenVertex, 8>;

// D_i: the eight projected cuboid vertices of each tracked object.
struct ScreenQuadSet {
  ScreenQuad follower{};
  ScreenQuad lead{};
  ScreenQuad follower_sign{};
  ScreenQuad lead_sign{};
};

// Axis-aligned body in road coordinates (s forward, y left, z up).
struct Cuboid {
  double s_min = 0.0, s_max = 0.0;
  double y_min = 0.0, y_max = 0.0;
  double z_min = 0.0, z_max = 0.0;

  // Vertex k uses bit 0 for s, bit 1 for y, bit 2 for z (0 = min, 1 = max).
  std::array<double, 3> vertex(int k) const;
};

Cuboid truck_cuboid(const VehicleState& truck, const RoadSpec& road);
Cuboid sign_cuboid(const VehicleState& truck, const RoadSpec& road);

WorldState spawn_scenario(const ScenarioConfig& config, const RoadSpec& road = {},
                          const DynamicsSpec& dynamics = {});
WorldState step_frame(const WorldState& world, const EgoInputs& inputs);
Positions compute_positions(const WorldState& world);

ScreenVertex project_point(const WorldState& world, const CameraSpec& camera,
                           const std::array<double, 3>& p);
ScreenQuad project_cuboid(const WorldState& world, const CameraSpec& camera, const Cuboid& c);
ScreenQuadSet project_cuboids(const WorldState& world, const CameraSpec& camera);

}  // namespace atma
