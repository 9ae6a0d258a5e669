#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "xnav/core/geometry.hpp"

namespace xnav {

/// Velocity in the robot's local frame.
struct Velocity {
  double vx{0.0};
  double vy{0.0};
  double psidot{0.0};

  double speed() const { return std::hypot(vx, vy); }

  friend bool operator==(const Velocity&, const Velocity&) = default;
};

/// Realized acceleration: linear part in the world frame, angular part.
struct Accel {
  double ax{0.0};
  double ay{0.0};
  double apsi{0.0};

  double linear() const { return std::hypot(ax, ay); }

  friend bool operator==(const Accel&, const Accel&) = default;
};

struct RobotState {
  Pose q;
  Velocity v;
  Accel a;
  double t{0.0};

  friend bool operator==(const RobotState&, const RobotState&) = default;
};

/// Body-frame velocity command (vx, vy m/s; psidot rad/s).
using VelocityCommand = Velocity;

enum class Activity { idle, walking, conversing };

std::string_view to_string(Activity a);
Activity activity_from_string(std::string_view s);

struct HumanConfig {
  int id{0};
  Pose pose;
  Vec2 velocity;  // world frame, m/s
  Activity activity{Activity::idle};
  std::optional<int> group_id;

  friend bool operator==(const HumanConfig&, const HumanConfig&) = default;
};

}  // namespace xnav
