#include "atma/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace atma {

std::vector<Point2> convex_hull(std::span<const Point2> points) {
  std::vector<Point2> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() <= 2) return pts;

  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

namespace {

bool on_segment(const Point2& a, const Point2& b, const Point2& p, double eps) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  if (len2 == 0.0) return std::hypot(p.x - a.x, p.y - a.y) <= eps;
  const double t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy)) <= eps;
}

}  // namespace

bool hull_contains(std::span<const Point2> hull, const Point2& p, double eps) {
  const std::size_t n = hull.size();
  if (n == 0) return false;
  if (n == 1) return std::hypot(p.x - hull[0].x, p.y - hull[0].y) <= eps;
  if (n == 2) return on_segment(hull[0], hull[1], p, eps);
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = hull[i];
    const Point2& b = hull[(i + 1) % n];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    // Signed distance to the left of edge a->b.
    if (cross(a, b, p) < -eps * len) return false;
  }
  return true;
}

Point2 hull_centroid(std::span<const Point2> hull) {
  if (hull.empty()) return {};
  double area2 = 0.0, cx = 0.0, cy = 0.0;
  const std::size_t n = hull.size();
  for (std::size_t i = 0; i < n && n >= 3; ++i) {
    const Point2& a = hull[i];
    const Point2& b = hull[(i + 1) % n];
    const double c = a.x * b.y - b.x * a.y;
    area2 += c;
    cx += (a.x + b.x) * c;
    cy += (a.y + b.y) * c;
  }
  if (n >= 3 && std::abs(area2) > 1e-300) return {cx / (3.0 * area2), cy / (3.0 * area2)};
  Point2 m;
  for (const auto& p : hull) {
    m.x += p.x;
    m.y += p.y;
  }
  return {m.x / static_cast<double>(n), m.y / static_cast<double>(n)};
}

}  // namespace atma
