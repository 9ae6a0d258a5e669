#pragma once

#include <cmath>
#include <numbers>

namespace xnav {

struct Vec2 {
  double x{0.0};
  double y{0.0};

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
  constexpr double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Planar pose: position in meters, heading in radians.
struct Pose {
  double x{0.0};
  double y{0.0};
  double psi{0.0};

  constexpr Vec2 position() const { return {x, y}; }

  friend bool operator==(const Pose&, const Pose&) = default;
};

/// Axis-aligned rectangle, min corner inclusive.
struct Rect {
  double xmin{0.0};
  double ymin{0.0};
  double xmax{0.0};
  double ymax{0.0};

  constexpr bool contains(Vec2 p) const {
    return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
  }
  constexpr double width() const { return xmax - xmin; }
  constexpr double height() const { return ymax - ymin; }

  /// Signed distance from p to the rectangle boundary: negative inside.
  double signed_distance(Vec2 p) const;

  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Wraps an angle into (-pi, pi]. Values already in range are returned
/// unchanged, so the operation is exactly idempotent.
double normalize_angle(double a);

double distance_point_segment(Vec2 p, Vec2 a, Vec2 b);

/// Rotates a body-frame vector into the world frame for heading psi.
inline Vec2 rotate(Vec2 v, double psi) {
  const double c = std::cos(psi);
  const double s = std::sin(psi);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

}  // namespace xnav
