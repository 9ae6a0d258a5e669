#pragma once

#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "xnav/captioner/backend.hpp"
#include "xnav/core/rng.hpp"
#include "xnav/core/scenario.hpp"
#include "xnav/eval/eval.hpp"
#include "xnav/latency/latency.hpp"
#include "xnav/runner/payload.hpp"
#include "xnav/saliency/cnn.hpp"
#include "xnav/sim/plan.hpp"
#include "xnav/sim/planner.hpp"
#include "xnav/sim/world.hpp"

namespace xnav {

enum class Mode { manual, autonomous };
std::string_view to_string(Mode m);
Mode mode_from_string(std::string_view s);

struct RunOptions {
  Mode mode{Mode::autonomous};
  bool explain{true};
  Trigger trigger{Trigger::fixed_interval};
  std::optional<double> capture_interval;  // default: scenario.capture_interval
  std::optional<std::uint64_t> seed;       // default: scenario.seed
  std::string latency_profile{"desk"};
  BackendConfig caption_backend;
  BackendConfig llm_backend;
  bool person_rule{true};      // lone "person" captions count as conflicts
  double decel_threshold{2.0};  // sudden-stop detector
  double stop_window{1.0};
  double t_max{25.0};           // explanations slower than this are flagged
  std::optional<double> delta_epsilon;  // default: 1 / expected_explanations

  nlohmann::ordered_json to_json() const;
  static RunOptions from_json(const nlohmann::json& j);
};

struct CmdIn {
  VelocityCommand cmd;
};
struct ToggleIn {
  bool enabled{false};
};
struct CaptureIn {};

/// Operator input, applied at the start of the next tick.
using Inbound = std::variant<CmdIn, ToggleIn, CaptureIn>;

nlohmann::ordered_json inbound_to_json(const Inbound& in);
/// Throws ParseError for unknown types or missing fields.
Inbound inbound_from_json(const nlohmann::json& j);

struct ScheduledInbound {
  std::int64_t tick{0};
  Inbound input;
};

struct RunResult {
  std::string run_id;
  sim::RunMetrics metrics;
  std::vector<std::string> events;  // NDJSON lines without newline
  std::vector<LatencyRecord> latency;
  std::vector<eval::LabelRow> labels;
  std::vector<std::pair<double, VelocityCommand>> commands;
  std::vector<RobotState> history;
  std::vector<std::vector<HumanConfig>> human_history;
  std::vector<sim::Plan> plans;
  std::size_t explanations{0};
  bool explain_at_end{false};
};

/// One simulated run: the control loop plus the explanation pipeline wired
/// over a topic bus. Pipeline stages run when their inputs are released and
/// publish their outputs at input stamp + stage latency (sim time), so the
/// whole run is a deterministic function of scenario, options and inputs.
class Runner {
 public:
  Runner(const Scenario& scenario, RunOptions options);
  ~Runner();

  Runner(const Runner&) = delete;
  Runner& operator=(const Runner&) = delete;

  Bus& bus() { return bus_; }
  const Scenario& scenario() const { return scenario_; }
  const RunOptions& options() const { return options_; }
  const std::string& run_id() const { return run_id_; }

  /// Thread-safe; picked up at the next tick.
  void submit(Inbound in);
  /// Queues input for a specific tick (replay).
  void schedule(ScheduledInbound in);

  void tick();
  bool done() const;
  double now() const;
  std::int64_t tick_index() const;

  /// Latest state message as JSON (thread-safe), for late joiners.
  nlohmann::json snapshot() const;

  /// Drains in-flight pipeline work, computes metrics. Call once.
  RunResult finish();

  /// Explanation artifacts go to dir/<run_id>/ when set.
  void set_artifact_dir(std::filesystem::path dir) { artifact_dir_ = std::move(dir); }

  /// Manual runs end once scheduled input is exhausted and the robot rests.
  void set_stop_when_idle(bool v);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Scenario scenario_;
  RunOptions options_;
  std::string run_id_;
  Bus bus_;
  std::optional<std::filesystem::path> artifact_dir_;
};

std::string make_run_id(const Scenario& s, const RunOptions& o);

/// Runs to completion in batch mode (as fast as possible).
RunResult run_scenario(const Scenario& scenario, const RunOptions& options,
                       const std::vector<ScheduledInbound>& inputs = {},
                       const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// run.json, scenario.json, events.ndjson, commands.csv, latency.csv,
/// metrics.json, labels.csv. Refuses a non-empty directory without `force`.
void write_run_dir(const std::filesystem::path& dir, const Scenario& scenario, const RunOptions& options,
                   const RunResult& result);

/// Commands file `t,vx,vy,psidot` to inputs at tick round(t / dt).
std::vector<ScheduledInbound> read_commands_csv(const std::filesystem::path& path, double dt);

/// Inbound "command" records of an event log.
std::vector<ScheduledInbound> inputs_from_events(const std::vector<std::string>& lines);

struct ReplayOutcome {
  bool identical{false};
  std::size_t original_lines{0};
  std::size_t replay_lines{0};
  std::optional<std::size_t> first_difference;  // 0-based line
  std::string original_line, replay_line;
  std::size_t tolerated{0};  // explanation-text differences accepted by --lenient
};

/// Re-executes a run directory and compares event logs line by line.
ReplayOutcome replay_run(const std::filesystem::path& run_dir, std::optional<std::uint64_t> seed_override = {},
                         bool lenient = false, const std::optional<std::filesystem::path>& out_dir = std::nullopt);

std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace xnav
