// xnav: run, replay, report and serve.
//
// Exit codes: 0 ok, 1 domain error, 2 usage or configuration error.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "xnav/core/error.hpp"
#include "xnav/core/scenario.hpp"
#include "xnav/eval/eval.hpp"
#include "xnav/gateway/gateway.hpp"
#include "xnav/latency/latency.hpp"
#include "xnav/runner/runner.hpp"

using namespace xnav;
namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

struct RunFlags {
  std::string scenario;
  std::string mode{"autonomous"};
  std::string explain{"on"};
  std::string trigger{"interval"};
  std::optional<std::uint64_t> seed;
  std::string caption_backend{"mock"};
  std::string llm_backend{"mock"};
  double backend_timeout{10.0};
  int backend_retry{3};
  std::string latency_profile{"desk"};
  std::optional<double> capture_interval;
  double t_max{25.0};
  bool no_person_rule{false};

  void add_to(CLI::App* app) {
    app->add_option("--scenario", scenario, "scenario JSON")->required()->check(CLI::ExistingFile);
    app->add_option("--mode", mode, "manual|autonomous")->check(CLI::IsMember({"manual", "autonomous"}));
    app->add_option("--explain", explain, "on|off")->check(CLI::IsMember({"on", "off"}));
    app->add_option("--trigger", trigger, "interval|manual|conflict")
        ->check(CLI::IsMember({"interval", "fixed_interval", "manual", "conflict", "conflict_event"}));
    app->add_option("--seed", seed);
    app->add_option("--caption-backend", caption_backend, "mock or base URL");
    app->add_option("--llm-backend", llm_backend, "mock or base URL");
    app->add_option("--backend-timeout", backend_timeout, "seconds per attempt");
    app->add_option("--backend-retry", backend_retry, "attempts");
    app->add_option("--latency-profile", latency_profile, "desk|hosted (mock stage latencies)")
        ->check(CLI::IsMember({"desk", "hosted"}));
    app->add_option("--capture-interval", capture_interval, "sim seconds");
    app->add_option("--t-max", t_max, "latency budget, seconds");
    app->add_flag("--no-person-rule", no_person_rule, "lone 'person' captions are not conflicts");
  }

  BackendConfig backend(const std::string& spec, const char* key_env) const {
    BackendConfig b;
    if (spec == "mock") return b;
    b.kind = BackendKind::remote;
    b.endpoint = spec;
    b.timeout_s = backend_timeout;
    b.retry = backend_retry;
    b.api_key_env = key_env;
    return b;
  }

  RunOptions options() const {
    RunOptions o;
    o.mode = mode_from_string(mode);
    o.explain = explain == "on";
    o.trigger = trigger_from_string(trigger);
    o.capture_interval = capture_interval;
    o.seed = seed;
    o.latency_profile = latency_profile;
    o.caption_backend = backend(caption_backend, "XNAV_CAPTION_API_KEY");
    o.llm_backend = backend(llm_backend, "XNAV_LLM_API_KEY");
    o.person_rule = !no_person_rule;
    o.t_max = t_max;
    return o;
  }
};

void print_metrics(const RunResult& r) {
  nlohmann::ordered_json j;
  j["run_id"] = r.run_id;
  j["metrics"] = sim::metrics_to_json(r.metrics);
  j["explanations"] = r.explanations;
  std::cout << j.dump(2) << '\n';
}

int cmd_run(const RunFlags& f, const std::string& commands, const std::string& out) {
  const Scenario scenario = load_scenario(f.scenario);
  const RunOptions options = f.options();
  std::vector<ScheduledInbound> inputs;
  if (!commands.empty()) inputs = read_commands_csv(commands, scenario.constants.dt);
  std::optional<fs::path> out_dir;
  if (!out.empty()) out_dir = out;
  const RunResult r = run_scenario(scenario, options, inputs, out_dir);
  print_metrics(r);
  return 0;
}

int cmd_replay(const std::string& dir, std::optional<std::uint64_t> seed, bool lenient, const std::string& out) {
  std::optional<fs::path> out_dir;
  if (!out.empty()) out_dir = out;
  const ReplayOutcome o = replay_run(dir, seed, lenient, out_dir);
  if (o.identical) {
    std::cout << "identical: " << o.original_lines << " records";
    if (o.tolerated) std::cout << " (" << o.tolerated << " explanation differences tolerated)";
    std::cout << '\n';
    return 0;
  }
  std::cout << "diverged at record " << (o.first_difference ? *o.first_difference + 1 : 0) << " of "
            << o.original_lines << " (replay has " << o.replay_lines << ")\n"
            << "original: " << o.original_line << '\n'
            << "replay:   " << o.replay_line << '\n';
  return 1;
}

sim::RunMetrics read_metrics(const fs::path& run_dir) {
  const fs::path p = run_dir / "metrics.json";
  std::ifstream in(p);
  if (!in) throw Error("cannot read " + p.string());
  try {
    return sim::metrics_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(p.string() + ": " + e.what());
  }
}

std::string render_latency(const std::vector<LatencyRecord>& records, double budget, bool csv) {
  const auto stats = trigger_stats(records, budget);
  std::ostringstream out;
  char buf[256];
  if (csv) {
    out << "trigger,count,mean,min,max,p95,fraction_above\n";
  } else {
    std::snprintf(buf, sizeof buf, "%-16s %6s %9s %9s %9s %9s %8s\n", "trigger", "n", "mean(s)", "min(s)", "max(s)",
                  "p95(s)", ">budget");
    out << buf;
  }
  for (const auto& [t, s] : stats) {
    if (csv)
      std::snprintf(buf, sizeof buf, "%s,%zu,%.6f,%.6f,%.6f,%.6f,%.6f\n", std::string(to_string(t)).c_str(), s.count,
                    s.mean, s.min, s.max, s.p95, s.fraction_above);
    else
      std::snprintf(buf, sizeof buf, "%-16s %6zu %9.3f %9.3f %9.3f %9.3f %7.1f%%\n",
                    std::string(to_string(t)).c_str(), s.count, s.mean, s.min, s.max, s.p95,
                    100.0 * s.fraction_above);
    out << buf;
  }
  return out.str();
}

int cmd_report(const std::vector<std::string>& runs, const std::string& survey, const std::string& labels,
               const std::vector<std::string>& latency, double budget, const std::string& format) {
  const bool csv = format == "csv";
  bool first = true;
  auto section = [&](const std::string& body) {
    if (!first) std::cout << '\n';
    first = false;
    std::cout << body;
  };
  if (!runs.empty()) {
    const auto cmp = eval::compare_runs(read_metrics(runs.at(0)), read_metrics(runs.at(1)));
    section(csv ? eval::render_csv(cmp) : eval::render_text(cmp));
  }
  if (!survey.empty()) {
    const auto s = eval::summarize_survey(eval::load_survey(survey));
    section(csv ? eval::render_csv(s) : eval::render_text(s));
  }
  if (!labels.empty()) {
    const auto c = eval::confusion(eval::load_labels(labels));
    section(csv ? eval::render_csv(c) : eval::render_text(c));
  }
  if (!latency.empty()) {
    std::vector<LatencyRecord> records;
    for (const auto& p : latency) {
      std::ifstream in(p);
      if (!in) throw Error("cannot read " + p);
      auto more = read_latency_csv(in);
      records.insert(records.end(), more.begin(), more.end());
    }
    section(render_latency(records, budget, csv));
  }
  return 0;
}

struct ServeFlags {
  std::uint16_t port{8765};
  std::string address{"127.0.0.1"};
  std::string token;
  std::string static_dir;
  double max_frame_rate{5.0};
  double speed{1.0};
};

int cmd_serve(const RunFlags& f, const ServeFlags& s, const std::string& out) {
  const Scenario scenario = load_scenario(f.scenario);
  Runner runner(scenario, f.options());
  if (!out.empty()) runner.set_artifact_dir(out);
  gateway::GatewayConfig cfg;
  cfg.address = s.address;
  cfg.port = s.port;
  cfg.token = s.token;
  cfg.max_frame_rate = s.max_frame_rate;
  if (!s.static_dir.empty()) cfg.static_dir = fs::path(s.static_dir);
  gateway::Gateway gw(runner, cfg);
  std::cout << "run " << runner.run_id() << " serving ws://" << s.address << ':' << gw.port() << "/ws" << std::endl;

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<double>(scenario.constants.dt / s.speed));
  auto next = clock::now();
  while (!runner.done() && !g_interrupted) {
    runner.tick();
    next += period;
    std::this_thread::sleep_until(next);
  }
  // let clients see the final state and metrics
  const RunResult r = runner.finish();
  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  gw.stop();
  if (!out.empty()) write_run_dir(out, scenario, runner.options(), r);
  print_metrics(r);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xnav: explainable social navigation simulator"};
  app.require_subcommand(1);

  RunFlags run_flags;
  std::string commands, out;
  auto* run = app.add_subcommand("run", "simulate one run");
  run_flags.add_to(run);
  run->add_option("--commands", commands, "t,vx,vy,psidot CSV for manual runs")->check(CLI::ExistingFile);
  run->add_option("--out", out, "run directory");

  std::string replay_dir, replay_out;
  std::optional<std::uint64_t> replay_seed;
  bool lenient = false;
  auto* replay = app.add_subcommand("replay", "re-execute a run directory and compare event logs");
  replay->add_option("dir", replay_dir)->required()->check(CLI::ExistingDirectory);
  replay->add_option("--seed", replay_seed, "override the recorded seed");
  replay->add_flag("--lenient", lenient, "accept format-valid explanation text differences");
  replay->add_option("--out", replay_out, "write the replayed run here");

  std::vector<std::string> runs, latency;
  std::string survey, labels, format{"text"};
  double budget = 25.0;
  auto* report = app.add_subcommand("report", "render comparison, survey, confusion and latency tables");
  report->add_option("--runs", runs, "WOE_DIR WE_DIR")->expected(2)->check(CLI::ExistingDirectory);
  report->add_option("--survey", survey)->check(CLI::ExistingFile);
  report->add_option("--labels", labels)->check(CLI::ExistingFile);
  report->add_option("--latency", latency, "latency CSV files")->check(CLI::ExistingFile);
  report->add_option("--budget", budget, "latency budget, seconds");
  report->add_option("--format", format)->check(CLI::IsMember({"text", "csv"}));

  RunFlags serve_flags;
  ServeFlags serve_opts;
  std::string serve_out;
  auto* serve = app.add_subcommand("serve", "wall-clock run bridged to WebSocket clients");
  serve_flags.mode = "manual";
  serve_flags.add_to(serve);
  serve->add_option("--port", serve_opts.port);
  serve->add_option("--address", serve_opts.address);
  serve->add_option("--token", serve_opts.token, "required as ?token= on /ws");
  serve->add_option("--static", serve_opts.static_dir, "UI assets")->check(CLI::ExistingDirectory);
  serve->add_option("--max-frame-rate", serve_opts.max_frame_rate);
  serve->add_option("--speed", serve_opts.speed, "sim seconds per wall second")->check(CLI::PositiveNumber);
  serve->add_option("--out", serve_out, "run directory written at the end");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(run_flags, commands, out);
    if (*replay) return cmd_replay(replay_dir, replay_seed, lenient, replay_out);
    if (*report) {
      if (runs.empty() && survey.empty() && labels.empty() && latency.empty()) {
        std::cerr << "report: nothing to do (give --runs, --survey, --labels or --latency)\n";
        return 2;
      }
      return cmd_report(runs, survey, labels, latency, budget, format);
    }
    if (*serve) return cmd_serve(serve_flags, serve_opts, serve_out);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
