#include "xnav/sim/constraints.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "xnav/core/error.hpp"

namespace xnav::sim {

double nearest_human_distance(Vec2 robot, std::span<const HumanConfig> humans) {
  double best = std::numeric_limits<double>::infinity();
  for (const HumanConfig& h : humans) best = std::min(best, distance(robot, h.pose.position()));
  return best;
}

double distance_constraint_margin(const RobotState& robot, std::span<const HumanConfig> humans,
                                  double d_safe, double d_social) {
  return nearest_human_distance(robot.q.position(), humans) - std::max(d_social, d_safe);
}

std::optional<double> accel_bound(double d_human, double d_safe, double d_social,
                                  double alpha_social) {
  if (d_social < d_safe)
    throw ValidationError({"d_safe", "d_social"}, "d_social must be >= d_safe");
  if (d_human >= d_social) return std::nullopt;
  if (d_human >= d_safe) return alpha_social;
  return std::nullopt;
}

double conflict_margin(const Plan& plan, std::span<const SocialZone> zones, std::size_t first) {
  if (plan.samples.empty()) throw std::invalid_argument("conflict_margin: empty plan");
  double h = std::numeric_limits<double>::infinity();
  for (std::size_t i = first; i < plan.samples.size(); ++i)
    h = std::min(h, zone_clearance(plan.samples[i].pose.position(), zones));
  return h;
}

double conflict_margin(const Plan& plan, std::span<const SocialZone> zones) {
  return conflict_margin(plan, zones, 0);
}

}  // namespace xnav::sim
