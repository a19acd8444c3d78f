#pragma once

#include <optional>
#include <span>
#include <vector>

#include "atma/geometry.hpp"
#include "atma/scenario.hpp"

namespace atma {

// One eye tracker sample. Gaze coordinates are normalized screen
// coordinates, origin top-left. Pupil diameters are absent when the source
// does not measure them (mouse-as-gaze).
struct GazeSample {
  double t_ms = 0.0;
  double gx = 0.0;
  double gy = 0.0;
  std::optional<double> pupil_left_mm;
  std::optional<double> pupil_right_mm;
  bool valid_left = false;
  bool valid_right = false;

  bool gaze_valid() const { return valid_left || valid_right; }
  Point2 point() const { return {gx, gy}; }
};

enum class SampleLabel { fixation_point, saccade_point, unclassified };

const char* to_string(SampleLabel label);

struct Fixation {
  std::size_t start = 0;  // first member sample index, inclusive
  std::size_t end = 0;    // last member sample index, inclusive
  Point2 center;
  double duration_ms = 0.0;
};

// Physical display used to convert normalized coordinates to visual angle.
// The eye sits on the screen normal through its center.
struct ScreenGeometry {
  double width_mm = 598.0;
  double height_mm = 336.0;
  double distance_mm = 650.0;
};

struct IvtParams {
  double velocity_threshold_dps = 30.0;
  double window_ms = 20.0;
  double min_fixation_ms = 60.0;
};

// Angle in degrees subtended at the eye by two normalized screen points.
double visual_angle_deg(const Point2& a, const Point2& b, const ScreenGeometry& screen);

// Velocity-threshold classification. Each sample's angular velocity is taken
// over a trailing window of max(2, 1 + round(window_ms / dt)) samples, where
// dt is the median sample spacing. Samples whose window has an invalid
// endpoint are unclassified; so is every sample when the stream is shorter
// than one window. Throws std::invalid_argument on decreasing timestamps.
std::vector<SampleLabel> ivt_classify(std::span<const GazeSample> stream, const IvtParams& params = {},
                                      const ScreenGeometry& screen = {});

std::vector<Fixation> group_fixations(std::span<const SampleLabel> labels, std::span<const GazeSample> stream,
                                      double min_duration_ms = IvtParams{}.min_fixation_ms);

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  bool contains(const Point2& p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
  Point2 center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
};

// Dashboard and mirror regions of the driver's view.
struct ScreenAreas {
  Rect speedometer{0.38, 0.80, 0.48, 0.95};
  Rect tachometer{0.52, 0.80, 0.62, 0.95};
  Rect left_mirror{0.02, 0.45, 0.14, 0.60};
  Rect right_mirror{0.86, 0.45, 0.98, 0.60};
  Rect rear_mirror{0.42, 0.03, 0.58, 0.12};
};

// A_i
struct AreaFlags {
  bool speedometer = false;
  bool tachometer = false;
  bool left_mirror = false;
  bool right_mirror = false;
  bool rear_mirror = false;

  bool any() const { return speedometer || tachometer || left_mirror || right_mirror || rear_mirror; }
  friend bool operator==(const AreaFlags&, const AreaFlags&) = default;
};

// M_i
struct ObjectFlags {
  bool follower = false;
  bool lead = false;
  bool follower_sign = false;
  bool lead_sign = false;

  bool on_follower_truck() const { return follower || follower_sign; }
  bool on_lead_truck() const { return lead || lead_sign; }
  friend bool operator==(const ObjectFlags&, const ObjectFlags&) = default;
};

struct ObjectHulls {
  std::vector<Point2> follower;
  std::vector<Point2> lead;
  std::vector<Point2> follower_sign;
  std::vector<Point2> lead_sign;
};

// Hull over the visible vertices only; vertices behind the camera are dropped.
std::vector<Point2> visible_hull(const ScreenQuad& quad);
ObjectHulls object_hulls(const ScreenQuadSet& quads);

AreaFlags gaze_area_flags(const Point2& g, const ScreenAreas& areas);
AreaFlags gaze_area_flags(const GazeSample& g, const ScreenAreas& areas);
ObjectFlags gaze_object_flags(const Point2& g, const ObjectHulls& hulls);
ObjectFlags gaze_object_flags(const GazeSample& g, const ScreenQuadSet& quads);

}  // namespace atma
