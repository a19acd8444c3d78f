#include "atma/gaze.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace atma {

const char* to_string(SampleLabel label) {
  switch (label) {
    case SampleLabel::fixation_point: return "fixation";
    case SampleLabel::saccade_point: return "saccade";
    case SampleLabel::unclassified: return "unclassified";
  }
  return "unclassified";
}

double visual_angle_deg(const Point2& a, const Point2& b, const ScreenGeometry& screen) {
  const std::array<double, 3> va{(a.x - 0.5) * screen.width_mm, (a.y - 0.5) * screen.height_mm, screen.distance_mm};
  const std::array<double, 3> vb{(b.x - 0.5) * screen.width_mm, (b.y - 0.5) * screen.height_mm, screen.distance_mm};
  const double cx = va[1] * vb[2] - va[2] * vb[1];
  const double cy = va[2] * vb[0] - va[0] * vb[2];
  const double cz = va[0] * vb[1] - va[1] * vb[0];
  const double dot = va[0] * vb[0] + va[1] * vb[1] + va[2] * vb[2];
  return std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), dot) * 180.0 / std::numbers::pi;
}

std::vector<SampleLabel> ivt_classify(std::span<const GazeSample> stream, const IvtParams& params,
                                      const ScreenGeometry& screen) {
  const std::size_t n = stream.size();
  std::vector<SampleLabel> labels(n, SampleLabel::unclassified);
  for (std::size_t i = 1; i < n; ++i)
    if (stream[i].t_ms < stream[i - 1].t_ms) throw std::invalid_argument("gaze timestamps must be non-decreasing");
  if (n < 2) return labels;

  std::vector<double> dts;
  dts.reserve(n - 1);
  for (std::size_t i = 1; i < n; ++i) dts.push_back(stream[i].t_ms - stream[i - 1].t_ms);
  std::nth_element(dts.begin(), dts.begin() + dts.size() / 2, dts.end());
  const double dt = dts[dts.size() / 2];
  std::size_t window = 2;
  if (dt > 0.0) window = std::max<std::size_t>(2, 1 + static_cast<std::size_t>(std::lround(params.window_ms / dt)));
  if (n < window) return labels;

  for (std::size_t i = 0; i < n; ++i) {
    if (!stream[i].gaze_valid()) continue;
    const std::size_t first = i + 1 >= window ? i + 1 - window : 0;
    const std::size_t last = first + window - 1;
    const GazeSample& a = stream[first];
    const GazeSample& b = stream[last];
    if (!a.gaze_valid() || !b.gaze_valid()) continue;
    const double span_s = (b.t_ms - a.t_ms) / 1000.0;
    if (!(span_s > 0.0)) continue;
    const double velocity = visual_angle_deg(a.point(), b.point(), screen) / span_s;
    labels[i] = velocity <= params.velocity_threshold_dps ? SampleLabel::fixation_point : SampleLabel::saccade_point;
  }
  return labels;
}

std::vector<Fixation> group_fixations(std::span<const SampleLabel> labels, std::span<const GazeSample> stream,
                                      double min_duration_ms) {
  if (labels.size() != stream.size()) throw std::invalid_argument("labels and stream differ in length");
  std::vector<Fixation> out;
  std::size_t i = 0;
  while (i < labels.size()) {
    if (labels[i] != SampleLabel::fixation_point) {
      ++i;
      continue;
    }
    std::size_t j = i;
    double sx = 0.0, sy = 0.0;
    while (j < labels.size() && labels[j] == SampleLabel::fixation_point) {
      sx += stream[j].gx;
      sy += stream[j].gy;
      ++j;
    }
    const auto count = static_cast<double>(j - i);
    const double duration = count * kFramePeriodMs;
    if (duration >= min_duration_ms) out.push_back({i, j - 1, {sx / count, sy / count}, duration});
    i = j;
  }
  return out;
}

std::vector<Point2> visible_hull(const ScreenQuad& quad) {
  std::vector<Point2> pts;
  pts.reserve(quad.size());
  for (const auto& v : quad)
    if (v.visible) pts.push_back({v.x, v.y});
  return convex_hull(pts);
}

ObjectHulls object_hulls(const ScreenQuadSet& quads) {
  return {visible_hull(quads.follower), visible_hull(quads.lead), visible_hull(quads.follower_sign),
          visible_hull(quads.lead_sign)};
}

AreaFlags gaze_area_flags(const Point2& g, const ScreenAreas& areas) {
  return {areas.speedometer.contains(g), areas.tachometer.contains(g), areas.left_mirror.contains(g),
          areas.right_mirror.contains(g), areas.rear_mirror.contains(g)};
}

AreaFlags gaze_area_flags(const GazeSample& g, const ScreenAreas& areas) {
  if (!g.gaze_valid()) return {};
  return gaze_area_flags(g.point(), areas);
}

ObjectFlags gaze_object_flags(const Point2& g, const ObjectHulls& hulls) {
  return {hull_contains(hulls.follower, g), hull_contains(hulls.lead, g), hull_contains(hulls.follower_sign, g),
          hull_contains(hulls.lead_sign, g)};
}

ObjectFlags gaze_object_flags(const GazeSample& g, const ScreenQuadSet& quads) {
  if (!g.gaze_valid()) return {};
  return gaze_object_flags(g.point(), object_hulls(quads));
}

}  // namespace atma
