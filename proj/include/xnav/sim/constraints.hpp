#pragma once

#include <optional>
#include <span>

#include "xnav/core/types.hpp"
#include "xnav/sim/plan.hpp"
#include "xnav/sim/zones.hpp"

namespace xnav::sim {

/// Distance from the robot to the nearest human; +inf when there are none.
double nearest_human_distance(Vec2 robot, std::span<const HumanConfig> humans);

/// min_j d_human(j) - max(d_social, d_safe). Negative means the distance
/// norm is violated; +inf when there are no humans.
double distance_constraint_margin(const RobotState& robot, std::span<const HumanConfig> humans,
                                  double d_safe, double d_social);

/// Acceleration bound of the socially acceptable motion norm. No bound
/// beyond d_social or inside d_safe (emergency manoeuvres); alpha_social in
/// between. Throws ValidationError when d_social < d_safe.
std::optional<double> accel_bound(double d_human, double d_safe, double d_social,
                                  double alpha_social);

/// Signed clearance h of a plan against social zones: minimum over samples
/// and zones. h >= 0 means conflict-free. +inf for no zones. Throws
/// std::invalid_argument for an empty plan.
double conflict_margin(const Plan& plan, std::span<const SocialZone> zones);

/// Same measure restricted to samples [first, end).
double conflict_margin(const Plan& plan, std::span<const SocialZone> zones, std::size_t first);

}  // namespace xnav::sim
