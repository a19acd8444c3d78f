#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "atma/gaze.hpp"
#include "atma/scenario.hpp"

using namespace atma;

namespace {

std::vector<GazeSample> stream_of(const std::vector<Point2>& pts, double period_ms = kFramePeriodMs) {
  std::vector<GazeSample> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    GazeSample g;
    g.t_ms = static_cast<double>(i) * period_ms;
    g.gx = pts[i].x;
    g.gy = pts[i].y;
    g.valid_left = g.valid_right = true;
    out.push_back(g);
  }
  return out;
}

// Angle between two screen points by the law of cosines on the eye-to-point rays.
double angle_oracle(Point2 a, Point2 b, const ScreenGeometry& s) {
  auto ray = [&](Point2 p) {
    return std::array<double, 3>{(p.x - 0.5) * s.width_mm, (p.y - 0.5) * s.height_mm, s.distance_mm};
  };
  const auto ra = ray(a), rb = ray(b);
  const double la = std::hypot(ra[0], ra[1], ra[2]), lb = std::hypot(rb[0], rb[1], rb[2]);
  const double chord = std::hypot(ra[0] - rb[0], ra[1] - rb[1], ra[2] - rb[2]);
  return std::acos(std::clamp((la * la + lb * lb - chord * chord) / (2 * la * lb), -1.0, 1.0)) * 180 / std::numbers::pi;
}

}  // namespace

TEST_CASE("visual angle") {
  const ScreenGeometry s;
  CHECK(visual_angle_deg({0.5, 0.5}, {0.5, 0.5}, s) == 0.0);
  CHECK(visual_angle_deg({0.5, 0.5}, {1.0, 0.5}, s) == doctest::Approx(std::atan(299.0 / 650.0) * 180 / std::numbers::pi));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 500; ++t) {
    const Point2 a{u(rng), u(rng)}, b{u(rng), u(rng)};
    CHECK(visual_angle_deg(a, b, s) == doctest::Approx(angle_oracle(a, b, s)).epsilon(1e-6));
    CHECK(visual_angle_deg(a, b, s) == doctest::Approx(visual_angle_deg(b, a, s)));
  }
}

TEST_CASE("I-VT labels a still gaze as fixation and a jump as saccade") {
  std::vector<Point2> pts(20, Point2{0.4, 0.4});
  for (std::size_t i = 10; i < 20; ++i) pts[i] = {0.6, 0.4};
  const auto labels = ivt_classify(stream_of(pts));
  for (std::size_t i = 0; i < 20; ++i)
    CHECK(labels[i] == (i == 10 ? SampleLabel::saccade_point : SampleLabel::fixation_point));
}

TEST_CASE("I-VT threshold sits at 30 deg/s") {
  // Constant angular speed just below and above the threshold.
  const ScreenGeometry s;
  const double step_deg_per_sample = 30.0 / 60.0;
  const double dx = std::tan(step_deg_per_sample * std::numbers::pi / 180) * s.distance_mm / s.width_mm;
  for (double scale : {0.98, 1.02}) {
    std::vector<Point2> pts;
    for (int i = 0; i < 5; ++i) pts.push_back({0.5 + i * dx * scale, 0.5});
    const auto labels = ivt_classify(stream_of(pts));
    CHECK(labels[1] == (scale < 1 ? SampleLabel::fixation_point : SampleLabel::saccade_point));
  }
}

TEST_CASE("I-VT window scales with the sample rate") {
  // At 120 Hz the window spans three samples: a one-sample jump is seen by
  // the two samples whose window contains it.
  std::vector<Point2> pts(12, Point2{0.3, 0.3});
  for (std::size_t i = 6; i < 12; ++i) pts[i] = {0.7, 0.3};
  const auto labels = ivt_classify(stream_of(pts, 1000.0 / 120.0));
  CHECK(labels[5] == SampleLabel::fixation_point);
  CHECK(labels[6] == SampleLabel::saccade_point);
  CHECK(labels[7] == SampleLabel::saccade_point);
  CHECK(labels[8] == SampleLabel::fixation_point);
}

TEST_CASE("I-VT invalid samples and edge cases") {
  auto s = stream_of(std::vector<Point2>(6, Point2{0.5, 0.5}));
  s[3].valid_left = s[3].valid_right = false;
  const auto labels = ivt_classify(s);
  CHECK(labels[3] == SampleLabel::unclassified);
  CHECK(labels[4] == SampleLabel::unclassified);  // window starts on the lost sample
  CHECK(labels[5] == SampleLabel::fixation_point);
  CHECK(ivt_classify(stream_of({{0.5, 0.5}}))[0] == SampleLabel::unclassified);
  CHECK(ivt_classify(std::vector<GazeSample>{}).empty());
  auto bad = stream_of(std::vector<Point2>(3, Point2{0.5, 0.5}));
  bad[2].t_ms = 0.0;
  CHECK_THROWS_AS(ivt_classify(bad), std::invalid_argument);
}

TEST_CASE("grouping fixations") {
  using L = SampleLabel;
  const std::vector<L> labels{L::fixation_point, L::fixation_point, L::fixation_point, L::fixation_point,
                              L::saccade_point,  L::fixation_point, L::fixation_point, L::unclassified,
                              L::fixation_point, L::fixation_point, L::fixation_point, L::fixation_point};
  std::vector<Point2> pts;
  for (int i = 0; i < 12; ++i) pts.push_back({0.1 * i, 0.5});
  const auto s = stream_of(pts);
  const auto fx = group_fixations(labels, s);
  REQUIRE(fx.size() == 2);
  CHECK(fx[0].start == 0);
  CHECK(fx[0].end == 3);
  CHECK(fx[0].duration_ms == doctest::Approx(4 * kFramePeriodMs));
  CHECK(fx[0].center.x == doctest::Approx(0.15));
  CHECK(fx[1].start == 8);
  CHECK(group_fixations(labels, s, 0.0).size() == 3);
  CHECK_THROWS_AS(group_fixations(std::vector<L>(3), s), std::invalid_argument);
}

TEST_CASE("area flags") {
  const ScreenAreas a;
  CHECK(gaze_area_flags(a.speedometer.center(), a).speedometer);
  CHECK_FALSE(gaze_area_flags(Point2{0.5, 0.5}, a).any());
  CHECK(gaze_area_flags(Point2{a.left_mirror.x0, a.left_mirror.y0}, a).left_mirror);
  GazeSample lost;
  lost.gx = a.speedometer.center().x;
  lost.gy = a.speedometer.center().y;
  CHECK_FALSE(gaze_area_flags(lost, a).any());
}

TEST_CASE("object flags from projected hulls") {
  ScenarioConfig sc;
  sc.ego_start_behind_atma_ft = 200;
  const auto w = spawn_scenario(sc);
  const auto quads = project_cuboids(w, CameraSpec{});
  const auto hulls = object_hulls(quads);
  REQUIRE(hulls.follower.size() >= 4);
  const auto c = hull_centroid(hulls.follower_sign);
  const auto f = gaze_object_flags(c, hulls);
  CHECK(f.follower_sign);
  CHECK(f.follower);  // the sign hangs on the truck's rear face
  CHECK_FALSE(f.lead);
  CHECK_FALSE(gaze_object_flags(Point2{0.02, 0.02}, hulls).on_follower_truck());
}

TEST_CASE("sign hits imply truck hits") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 100; ++t) {
    ScenarioConfig sc;
    sc.ego_start_behind_atma_ft = 120 + 1500 * u(rng);
    auto w = spawn_scenario(sc);
    w.ego().lane = u(rng) < 0.5 ? 0 : 1;
    w.ego().lateral_offset = 4 * (u(rng) - 0.5);
    const auto hulls = object_hulls(project_cuboids(w, CameraSpec{}));
    for (int q = 0; q < 500; ++q) {
      const Point2 g{u(rng), u(rng)};
      const auto f = gaze_object_flags(g, hulls);
      if (f.follower_sign) CHECK(f.follower);
      if (f.lead_sign) CHECK(f.lead);
    }
  }
}

TEST_CASE("hull drops vertices behind the camera") {
  ScreenQuad q{};
  for (int k = 0; k < 8; ++k) q[k] = {0.1 * k, 0.05 * (k % 3), k < 4};
  const auto h = visible_hull(q);
  for (const auto& p : h) CHECK(p.x < 0.35);
}
