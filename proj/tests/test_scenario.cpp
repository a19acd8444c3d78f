#include <doctest.h>

#include <cmath>
#include <random>

#include "atma/scenario.hpp"
#include "support/oracles.hpp"

using namespace atma;

TEST_CASE("unit conversions") {
  CHECK(mph_to_fps(15.0) == doctest::Approx(22.0));
  CHECK(fps_to_mph(mph_to_fps(37.5)) == doctest::Approx(37.5));
  CHECK(FrameClock::ticks(1) == 50);
  CHECK(FrameClock::time_ms(3) == doctest::Approx(50.0));
  // No drift after an hour of frames.
  CHECK(FrameClock::time_ms(216000) == 3600000.0);
}

TEST_CASE("spawn layout") {
  ScenarioConfig sc;
  const auto w = spawn_scenario(sc);
  CHECK(w.ego().s == 0.0);
  CHECK(w.ego().lane == 0);
  CHECK(w.follower().lane == 0);
  CHECK(w.lead().lane == 0);
  CHECK(w.lead().rear() - w.follower().s == doctest::Approx(100.0));
  const auto p = compute_positions(w);
  CHECK(p.p_f == doctest::Approx(1800.0));
  CHECK(p.p_l == doctest::Approx(1800.0 + 30 + 100 + 30 + dims::kCarLengthFt));
  CHECK(p.p_e == doctest::Approx(w.road.exit_position_ft));
  CHECK(w.follower().speed_mph == 15.0);

  int behind = 0;
  for (const auto& v : w.vehicles)
    if (v.kind == VehicleKind::npv && v.lane == 0) {
      ++behind;
      CHECK(v.s < w.ego().rear());
    }
  CHECK(behind == 1);
}

TEST_CASE("left-lane spacing follows the traffic volume") {
  for (auto [volume, mean] : {std::pair{TrafficVolume::low, 650.0}, std::pair{TrafficVolume::high, 160.0}}) {
    ScenarioConfig sc;
    sc.traffic_volume = volume;
    CHECK(sc.effective_npv_spacing() == mean);
    const auto w = spawn_scenario(sc);
    std::vector<double> s;
    for (const auto& v : w.vehicles)
      if (v.kind == VehicleKind::npv && v.lane == 1) s.push_back(v.s);
    std::sort(s.begin(), s.end());
    for (std::size_t i = 1; i < s.size(); ++i) {
      CHECK(s[i] - s[i - 1] >= 0.75 * mean - 1e-9);
      CHECK(s[i] - s[i - 1] <= 1.25 * mean + 1e-9);
    }
    CHECK((s.back() - s.front()) / (s.size() - 1) == doctest::Approx(mean).epsilon(0.1));
  }
}

TEST_CASE("spawn is a function of the seed") {
  ScenarioConfig a, b;
  a.seed = b.seed = 42;
  CHECK(spawn_scenario(a).vehicles.size() == spawn_scenario(b).vehicles.size());
  CHECK(spawn_scenario(a).vehicles.back().s == spawn_scenario(b).vehicles.back().s);
  b.seed = 43;
  CHECK(spawn_scenario(a).vehicles.back().s != spawn_scenario(b).vehicles.back().s);
}

TEST_CASE("invalid configurations") {
  ScenarioConfig sc;
  sc.atma_gap_ft = 0;
  CHECK_THROWS_AS(spawn_scenario(sc), ConfigError);
  sc = {};
  sc.atma_speed_mph = 20;
  CHECK_THROWS_AS(spawn_scenario(sc), ConfigError);
  sc = {};
  sc.npv_mean_spacing_ft = 30;
  CHECK_THROWS_AS(spawn_scenario(sc), ConfigError);
  sc = {};
  sc.npv_spacing_jitter = 1.0;
  CHECK_THROWS_AS(spawn_scenario(sc), ConfigError);
  RoadSpec road;
  road.exit_position_ft = road.length_ft + 1;
  CHECK_THROWS_AS(spawn_scenario({}, road), ConfigError);
  CHECK_THROWS_AS(parse_traffic_volume("medium"), ConfigError);
  CHECK(parse_traffic_volume("high") == TrafficVolume::high);
}

TEST_CASE("ego speed matches the drag model") {
  // Full accelerator from rest against quadratic drag.
  WorldState w = spawn_scenario({});
  EgoInputs in;
  in.accel = 0.5;
  for (int f = 1; f <= 600; ++f) {
    w = step_frame(w, in);
    if (f % 60 == 0) {
      const double want = oracle::speed_from_rest(4.0, 3.0e-4, f * kDt);
      CHECK(w.ego().speed_mph == doctest::Approx(want).epsilon(0.005));
    }
  }
  // Clamped at the speed limit, never negative.
  in.accel = 1.0;
  for (int f = 0; f < 3600; ++f) w = step_frame(w, in);
  CHECK(w.ego().speed_mph == 65.0);
  in = {};
  in.brake = 1.0;
  for (int f = 0; f < 600; ++f) w = step_frame(w, in);
  CHECK(w.ego().speed_mph == 0.0);
}

TEST_CASE("inputs are clamped") {
  EgoInputs in;
  in.accel = 3;
  in.brake = -1;
  in.steer = 9;
  const auto c = in.clamped();
  CHECK(c.accel == 1.0);
  CHECK(c.brake == 0.0);
  CHECK(c.steer == 1.0);
}

TEST_CASE("lane change at the bounded lateral rate") {
  WorldState w = spawn_scenario({});
  EgoInputs in;
  in.target_lane = 1;
  for (int f = 0; f < 120; ++f) {
    const double before = w.ego().y(w.road);
    w = step_frame(w, in);
    CHECK(w.ego().y(w.road) - before == doctest::Approx(6.0 / 60.0));
  }
  CHECK(w.ego().lane == 1);
  CHECK(std::abs(w.ego().lateral_offset) < 1e-9);
  const double settled = w.ego().y(w.road);
  w = step_frame(w, in);
  CHECK(std::abs(w.ego().y(w.road) - settled) < 1e-9);
  // Steering overrides the target and stays on the road.
  in = {};
  in.steer = -1;
  for (int f = 0; f < 600; ++f) w = step_frame(w, in);
  CHECK(w.ego().y(w.road) == doctest::Approx(18.0));
}

TEST_CASE("ATMA convoy holds its gap and speed cap") {
  ScenarioConfig sc;
  sc.atma_speed_mph = 10;
  WorldState w = spawn_scenario(sc);
  w.vehicles[2].desired_speed_mph = 40;  // lead asks for more than the cap
  for (int f = 0; f < 3600; ++f) {
    w = step_frame(w, {});
    CHECK(w.lead().speed_mph <= 15.0);
    CHECK(w.follower().speed_mph <= 15.0);
  }
  CHECK(w.lead().speed_mph == doctest::Approx(15.0));
  CHECK(w.lead().rear() - w.follower().s == doctest::Approx(100.0).epsilon(0.01));
}

TEST_CASE("NPV behind the ego keeps a safe gap") {
  WorldState w = spawn_scenario({});
  for (int f = 0; f < 3600; ++f) {
    w = step_frame(w, {});
    for (const auto& v : w.vehicles)
      if (v.kind == VehicleKind::npv && v.lane == 0) CHECK(w.ego().rear() - v.s >= 19.0);
  }
}

TEST_CASE("cuboids") {
  const auto w = spawn_scenario({});
  const auto t = truck_cuboid(w.follower(), w.road);
  CHECK(t.s_max - t.s_min == dims::kTruckLengthFt);
  CHECK(t.y_max - t.y_min == dims::kTruckWidthFt);
  CHECK(t.z_max - t.z_min == dims::kTruckHeightFt);
  const auto s = sign_cuboid(w.follower(), w.road);
  CHECK(s.s_min == t.s_min);  // flush with the rear face
  CHECK(s.z_min == dims::kSignBottomFt);
  CHECK(s.z_max == dims::kSignBottomFt + dims::kSignHeightFt);
  CHECK(s.z_max <= t.z_max);
  CHECK(s.y_max - s.y_min == dims::kSignWidthFt);
  const auto v = t.vertex(7);
  CHECK(v[0] == t.s_max);
  CHECK(v[1] == t.y_max);
  CHECK(v[2] == t.z_max);
}

TEST_CASE("projection matches the pinhole oracle") {
  CameraSpec cam;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  WorldState w = spawn_scenario({});
  w.ego().lateral_offset = 1.3;
  const std::array<double, 3> eye{w.ego().s - cam.eye_back_ft, w.ego().y(w.road), cam.eye_up_ft};
  for (int t = 0; t < 1000; ++t) {
    const std::array<double, 3> p{300 * u(rng), 50 * u(rng), 5 + 10 * u(rng)};
    const auto got = project_point(w, cam, p);
    const auto want = oracle::pinhole(eye, cam.horizontal_fov_deg, cam.aspect, cam.near_ft, p);
    REQUIRE(got.visible == want.visible);
    if (want.visible) {
      CHECK(got.x == doctest::Approx(want.x).epsilon(1e-9));
      CHECK(got.y == doctest::Approx(want.y).epsilon(1e-9));
    }
  }
  // Straight ahead at eye height lands at the screen center.
  const auto c = project_point(w, cam, {eye[0] + 50, eye[1], eye[2]});
  CHECK(c.x == doctest::Approx(0.5));
  CHECK(c.y == doctest::Approx(0.5));
  CHECK_FALSE(project_point(w, cam, {eye[0] + 0.05, eye[1], eye[2]}).visible);
}

TEST_CASE("camera validation") {
  CameraSpec cam;
  cam.horizontal_fov_deg = 180;
  CHECK_THROWS_AS(cam.validate(), ConfigError);
  cam = {};
  cam.near_ft = 0;
  CHECK_THROWS_AS(cam.validate(), ConfigError);
  CHECK(CameraSpec{}.focal_x() == doctest::Approx(0.5 / std::tan(M_PI / 6)));
}
