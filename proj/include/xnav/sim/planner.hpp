#pragma once

#include <span>

#include "xnav/core/error.hpp"
#include "xnav/core/geometry.hpp"
#include "xnav/core/scenario.hpp"
#include "xnav/sim/plan.hpp"
#include "xnav/sim/zones.hpp"

namespace xnav::sim {

class NoPathError : public Error {
 public:
  using Error::Error;
};

struct PlannerConfig {
  double resolution{0.1};
  double zone_margin{0.15};      // preferred clearance to zones
  double obstacle_margin{0.08};  // preferred clearance beyond robot_radius
  double soft_cost{10.0};        // cost multiplier inside the preferred margin
  double escape_cost{100.0};     // cost multiplier inside a zone (escape plans)
};

/// Static geometry the planner avoids besides social zones.
struct Workspace {
  Rect bounds;
  std::span<const Rect> obstacles;
  double robot_radius{0.0};

  /// Clearance of the robot disc centred at p to obstacles and bounds.
  double obstacle_clearance(Vec2 p) const;
};

/// Straight-line test used for shortcutting and verification: every point
/// of a-b keeps at least the given clearances (sampled with Lipschitz slack).
bool segment_clear(Vec2 a, Vec2 b, const Workspace& ws, std::span<const SocialZone> zones,
                   double min_obstacle_clearance, double min_zone_clearance);

/// 8-connected grid A* over obstacle- and zone-inflated cells, greedy
/// shortcut smoothing, then accel-limited velocity profiling sampled at dt.
/// The profile starts at speed v0 along the first segment and ends at rest.
/// Throws NoPathError when the grid disconnects start from goal.
Plan plan_path(const Pose& start, const Pose& goal, std::span<const SocialZone> zones,
               const Workspace& ws, const ScenarioConstants& constants, double t0 = 0.0,
               double v0 = 0.0, const PlannerConfig& cfg = {});

/// Profiles an existing polyline (exposed for tests and manual-mode hints).
Plan profile_path(std::vector<Vec2> path, double t0, double v0, const ScenarioConstants& c);

}  // namespace xnav::sim
