#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "xnav/core/scenario.hpp"
#include "xnav/core/types.hpp"

namespace xnav::sim {

struct WorldState {
  std::shared_ptr<const Scenario> scenario;
  std::int64_t tick{0};
  RobotState robot;
  std::vector<HumanConfig> humans;

  double t() const { return robot.t; }
};

/// Applies seeded jitter to human tracks (scenario.human_jitter) and returns
/// the world at t = 0.
WorldState make_world(const Scenario& scenario, std::uint64_t seed);

/// Advances one tick. Linear acceleration toward the commanded velocity is
/// clamped to the social acceleration bound for the current nearest-human
/// distance, speed is capped at v_max, then the pose integrates the new
/// velocity (semi-implicit Euler). Humans follow their scripted tracks.
WorldState step(const WorldState& world, const VelocityCommand& command, double dt);

/// Clamps a body-frame command to the speed limit.
VelocityCommand clamp_command(VelocityCommand cmd, double v_max);

/// Counts hard-braking episodes: maximal runs of samples whose deceleration
/// exceeds decel_threshold, counted when the speed falls below stop_speed
/// within the run. Episodes starting within `window` seconds of the previous
/// counted one merge into it.
int detect_sudden_stop(std::span<const double> speeds, double dt, double decel_threshold,
                       double window, double stop_speed = 0.05);

}  // namespace xnav::sim
