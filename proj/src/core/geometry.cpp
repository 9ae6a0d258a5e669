#include "xnav/core/geometry.hpp"

#include <algorithm>

namespace xnav {

double Rect::signed_distance(Vec2 p) const {
  const double dx = std::max(xmin - p.x, p.x - xmax);
  const double dy = std::max(ymin - p.y, p.y - ymax);
  if (dx <= 0.0 && dy <= 0.0) return std::max(dx, dy);
  return std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
}

double normalize_angle(double a) {
  constexpr double pi = std::numbers::pi;
  if (a > -pi && a <= pi) return a;
  double r = std::fmod(a + pi, 2.0 * pi);
  if (r <= 0.0) r += 2.0 * pi;
  r -= pi;
  // fmod rounding can land exactly on -pi
  return r <= -pi ? pi : r;
}

double distance_point_segment(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = ab.dot(ab);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return distance(p, a + ab * t);
}

}  // namespace xnav
