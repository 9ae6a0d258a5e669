#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xnav/core/geometry.hpp"
#include "xnav/core/types.hpp"

namespace xnav {

inline constexpr int kScenarioVersion = 1;

struct Waypoint {
  double t{0.0};
  double x{0.0};
  double y{0.0};

  friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

/// A human with a scripted, piecewise-linear track. Before the first and
/// after the last waypoint the human holds position.
struct HumanSpec {
  int id{0};
  Activity activity{Activity::idle};
  std::optional<int> group_id;
  double psi{0.0};  // heading while stationary
  std::vector<Waypoint> track;

  friend bool operator==(const HumanSpec&, const HumanSpec&) = default;
};

struct ScenarioConstants {
  double d_safe{0.5};
  double d_social{1.2};
  double alpha_social{0.5};
  double v_max{0.6};
  double dt{0.1};
  double group_radius{0.6};
  double robot_radius{0.2};
  double a_nominal{0.5};
  double a_brake{3.0};
  double sense_range{2.0};
  double max_time{120.0};
  double goal_tolerance{0.1};

  friend bool operator==(const ScenarioConstants&, const ScenarioConstants&) = default;
};

struct Scenario {
  int version{kScenarioVersion};
  std::string id{"scenario"};
  std::string setting{"hallway"};
  Rect bounds;
  std::vector<Rect> obstacles;
  Pose robot_start;
  Pose goal;
  std::vector<HumanSpec> humans;
  ScenarioConstants constants;
  std::uint64_t seed{0};
  double capture_interval{5.0};
  double human_jitter{0.0};
  int expected_explanations{3};

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Human state at sim-time t from its scripted track.
HumanConfig human_at(const HumanSpec& spec, double t);

/// Throws ValidationError naming the offending field path(s).
void validate(const Scenario& s);

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);

/// Reads and validates a scenario file. Throws ParseError or ValidationError.
Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const Scenario& s, const std::filesystem::path& path);

}  // namespace xnav
