#pragma once

#include <vector>

#include "xnav/core/geometry.hpp"

namespace xnav::sim {

struct PlanSample {
  double t{0.0};
  double s{0.0};  // arc length from the plan start
  Pose pose;
  Vec2 velocity;  // world frame
};

/// Time-parameterized trajectory. `path` is the geometric polyline the
/// samples were profiled along.
struct Plan {
  int id{0};
  std::vector<PlanSample> samples;
  std::vector<Vec2> path;
  bool escape{false};  // started inside a social zone

  double horizon() const { return samples.empty() ? 0.0 : samples.back().t - samples.front().t; }
  double length() const { return samples.empty() ? 0.0 : samples.back().s; }
};

}  // namespace xnav::sim
