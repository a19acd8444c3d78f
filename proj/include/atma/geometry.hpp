#pragma once

#include <span>
#include <vector>

namespace atma {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
  friend auto operator<=>(const Point2&, const Point2&) = default;
};

// Twice the signed area of triangle (o, a, b); positive when o->a->b turns
// counterclockwise in a y-up frame.
inline double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew's monotone chain. Returns hull vertices in counterclockwise order
// (positive orientation under cross()), starting from the lexicographically
// smallest point, with duplicates and collinear boundary points removed.
// A single distinct point yields one vertex, collinear input yields the two
// endpoints, empty input yields an empty hull.
std::vector<Point2> convex_hull(std::span<const Point2> points);

// Boundary-inclusive containment test against a hull produced by
// convex_hull(). Degenerate hulls (point, segment) contain the points they
// cover. `eps` absorbs round-off on edges.
bool hull_contains(std::span<const Point2> hull, const Point2& p, double eps = 1e-12);

// Area centroid of a convex polygon; falls back to the vertex mean for
// degenerate hulls.
Point2 hull_centroid(std::span<const Point2> hull);

}  // namespace atma
