#include "xnav/sim/metrics.hpp"

#include <nlohmann/json.hpp>

namespace xnav::sim {

nlohmann::json metrics_to_json(const RunMetrics& m) {
  nlohmann::ordered_json j;
  j["scenario_id"] = m.scenario_id;
  j["total_trajectory_m"] = m.total_trajectory_m;
  j["total_time_s"] = m.total_time_s;
  j["conflicts_detected"] = m.conflicts_detected;
  j["sudden_stops"] = m.sudden_stops;
  j["goal_reached"] = m.goal_reached;
  j["epsilon"] = m.epsilon;
  return nlohmann::json(j);
}

RunMetrics metrics_from_json(const nlohmann::json& j) {
  RunMetrics m;
  m.scenario_id = j.value("scenario_id", std::string{});
  m.total_trajectory_m = j.at("total_trajectory_m").get<double>();
  m.total_time_s = j.at("total_time_s").get<double>();
  m.conflicts_detected = j.at("conflicts_detected").get<int>();
  m.sudden_stops = j.at("sudden_stops").get<int>();
  m.goal_reached = j.at("goal_reached").get<bool>();
  m.epsilon = j.at("epsilon").get<double>();
  return m;
}

double trajectory_length(std::span<const RobotState> history) {
  double total = 0.0;
  for (std::size_t i = 1; i < history.size(); ++i)
    total += distance(history[i - 1].q.position(), history[i].q.position());
  return total;
}

}  // namespace xnav::sim
