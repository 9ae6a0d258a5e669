#pragma once

#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "xnav/core/types.hpp"

namespace xnav::sim {

struct RunMetrics {
  std::string scenario_id;
  double total_trajectory_m{0.0};
  double total_time_s{0.0};
  int conflicts_detected{0};
  int sudden_stops{0};
  bool goal_reached{false};
  double epsilon{0.0};

  friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

nlohmann::json metrics_to_json(const RunMetrics& m);
RunMetrics metrics_from_json(const nlohmann::json& j);

/// Sum of per-step displacements over a state history.
double trajectory_length(std::span<const RobotState> history);

}  // namespace xnav::sim
