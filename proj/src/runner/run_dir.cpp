#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "xnav/core/error.hpp"
#include "xnav/runner/runner.hpp"

namespace xnav {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

void write_run_dir(const fs::path& dir, const Scenario& scenario, const RunOptions& options,
                   const RunResult& result) {
  fs::create_directories(dir);
  nlohmann::ordered_json run;
  run["run_id"] = result.run_id;
  run["scenario_id"] = scenario.id;
  run["options"] = options.to_json();
  write_text(dir / "run.json", run.dump(2) + "\n");
  write_text(dir / "scenario.json", scenario_to_json(scenario).dump(2) + "\n");

  std::string events;
  for (const auto& l : result.events) events += l + "\n";
  write_text(dir / "events.ndjson", events);

  std::ostringstream cmds;
  cmds << "t,vx,vy,psidot\n";
  for (const auto& [t, c] : result.commands)
    cmds << num(t) << ',' << num(c.vx) << ',' << num(c.vy) << ',' << num(c.psidot) << '\n';
  write_text(dir / "commands.csv", cmds.str());

  std::ostringstream lat;
  write_latency_csv(lat, result.latency);
  write_text(dir / "latency.csv", lat.str());

  write_text(dir / "metrics.json", sim::metrics_to_json(result.metrics).dump(2) + "\n");

  std::ostringstream labels;
  eval::write_labels(labels, result.labels);
  write_text(dir / "labels.csv", labels.str());
}

std::vector<ScheduledInbound> read_commands_csv(const fs::path& path, double dt) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "t,vx,vy,psidot") throw ParseError("commands file: bad header in " + path.string());
  std::vector<ScheduledInbound> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::stringstream ss(lines[i]);
    std::string cell;
    std::vector<double> v;
    try {
      while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ParseError("commands file: bad number on line " + std::to_string(i + 1));
    }
    if (v.size() != 4) throw ParseError("commands file: expected 4 fields on line " + std::to_string(i + 1));
    out.push_back({static_cast<std::int64_t>(std::llround(v[0] / dt)), CmdIn{{v[1], v[2], v[3]}}});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.tick < b.tick; });
  return out;
}

std::vector<ScheduledInbound> inputs_from_events(const std::vector<std::string>& lines) {
  std::vector<ScheduledInbound> out;
  for (const auto& l : lines) {
    if (l.find("\"kind\":\"command\"") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(l);
    out.push_back({j.at("tick").get<std::int64_t>(), inbound_from_json(j.at("payload"))});
  }
  return out;
}

namespace {

bool explanation_text_only_differs(const std::string& a, const std::string& b) {
  nlohmann::json ja, jb;
  try {
    ja = nlohmann::json::parse(a);
    jb = nlohmann::json::parse(b);
  } catch (const nlohmann::json::exception&) {
    return false;
  }
  if (ja.value("kind", "") != "explanation" || jb.value("kind", "") != "explanation") return false;
  const std::string ta = ja["payload"].value("text", ""), tb = jb["payload"].value("text", "");
  if (!validate_format(tb).empty()) return false;
  for (auto* j : {&ja, &jb}) {
    (*j)["payload"].erase("text");
    (*j)["payload"].erase("latency_s");
    (*j)["payload"].erase("late");
  }
  return ja == jb;
}

}  // namespace

ReplayOutcome replay_run(const fs::path& run_dir, std::optional<std::uint64_t> seed_override, bool lenient,
                         const std::optional<fs::path>& out_dir) {
  const auto original = read_lines(run_dir / "events.ndjson");
  nlohmann::json run;
  {
    std::ifstream in(run_dir / "run.json");
    if (!in) throw Error("cannot open " + (run_dir / "run.json").string());
    try {
      run = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("run.json: ") + e.what());
    }
  }
  RunOptions options = RunOptions::from_json(run.at("options"));
  const Scenario scenario = load_scenario(run_dir / "scenario.json");
  if (seed_override) options.seed = *seed_override;
  const RunResult result = run_scenario(scenario, options, inputs_from_events(original), out_dir);

  ReplayOutcome o;
  o.original_lines = original.size();
  o.replay_lines = result.events.size();
  const std::size_t n = std::max(original.size(), result.events.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::string a = i < original.size() ? original[i] : std::string("<end of log>");
    const std::string b = i < result.events.size() ? result.events[i] : std::string("<end of log>");
    if (a == b) continue;
    if (lenient && explanation_text_only_differs(a, b)) {
      ++o.tolerated;
      continue;
    }
    o.first_difference = i;
    o.original_line = a;
    o.replay_line = b;
    break;
  }
  o.identical = !o.first_difference;
  return o;
}

}  // namespace xnav
