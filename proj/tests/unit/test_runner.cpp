#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "support/scenario_gen.hpp"
#include "xnav/core/error.hpp"
#include "xnav/runner/runner.hpp"
#include "xnav/sim/constraints.hpp"

using namespace xnav;
namespace fs = std::filesystem;

namespace {

Scenario hallway() { return load_scenario(std::string(XNAV_DATA_DIR) + "/scenarios/hallway.json"); }
Scenario corridor() { return load_scenario(std::string(XNAV_DATA_DIR) + "/scenarios/empty_corridor.json"); }

RunOptions opts(bool explain, std::uint64_t seed = 1, Mode mode = Mode::autonomous) {
  RunOptions o;
  o.explain = explain;
  o.seed = seed;
  o.mode = mode;
  return o;
}

nlohmann::json parse(const std::string& line) { return nlohmann::json::parse(line); }

std::vector<nlohmann::json> of_kind(const RunResult& r, std::string_view kind) {
  std::vector<nlohmann::json> out;
  for (const auto& l : r.events)
    if (auto j = parse(l); j["kind"] == kind) out.push_back(j);
  return out;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("xnav_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(RunScenario, EmptyCorridorWithoutExplanations) {
  const auto r = run_scenario(corridor(), opts(false));
  EXPECT_TRUE(r.metrics.goal_reached);
  EXPECT_EQ(r.metrics.conflicts_detected, 0);
  EXPECT_EQ(r.metrics.epsilon, 0.0);
  EXPECT_EQ(r.explanations, 0u);
  EXPECT_TRUE(of_kind(r, "capture").empty());
  EXPECT_GE(r.metrics.total_trajectory_m, 8.4 - 1e-9);
}

TEST(RunScenario, ConflictsAreFollowedByReplan) {
  const auto r = run_scenario(hallway(), opts(true));
  ASSERT_GE(r.metrics.conflicts_detected, 1);
  // Every conflict gets a new plan id before the next capture.
  for (std::size_t i = 0; i < r.events.size(); ++i) {
    const auto e = parse(r.events[i]);
    if (e["kind"] != "conflict") continue;
    const int plan_id = e["payload"]["plan_id"];
    bool replanned = false;
    for (std::size_t k = i + 1; k < r.events.size(); ++k) {
      const auto f = parse(r.events[k]);
      if (f["kind"] == "capture") break;
      if (f["kind"] == "replan" && f["payload"]["plan_id"].get<int>() > plan_id) {
        replanned = true;
        break;
      }
    }
    EXPECT_TRUE(replanned) << r.events[i];
  }
}

TEST(RunScenario, EventLogRecordShape) {
  const auto r = run_scenario(hallway(), opts(true));
  std::int64_t last_tick = 0;
  for (const auto& l : r.events) {
    const auto j = parse(l);
    ASSERT_TRUE(j.contains("tick") && j.contains("stamp") && j.contains("kind") && j.contains("payload")) << l;
    EXPECT_GE(j["tick"].get<std::int64_t>(), last_tick);
    last_tick = j["tick"];
  }
  EXPECT_EQ(parse(r.events.back())["kind"], "metrics");
}

TEST(RunScenario, DeterministicForFixedInputs) {
  const auto a = run_scenario(hallway(), opts(true, 7));
  const auto b = run_scenario(hallway(), opts(true, 7));
  EXPECT_EQ(a.events, b.events);
  const auto c = run_scenario(hallway(), opts(true, 8));
  EXPECT_NE(a.events, c.events);
}

TEST(RunScenario, EpsilonSemantics) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto off = run_scenario(hallway(), opts(false, seed));
    EXPECT_EQ(off.metrics.epsilon, 0.0);
    const auto on = run_scenario(hallway(), opts(true, seed));
    EXPECT_GT(on.metrics.epsilon, 0.0);
    EXPECT_LE(on.metrics.epsilon, 1.0);
  }
}

TEST(RunScenario, ExplanationsPassFormatCheck) {
  const auto r = run_scenario(hallway(), opts(true, 3));
  const auto ex = of_kind(r, "explanation");
  ASSERT_FALSE(ex.empty());
  for (const auto& e : ex) EXPECT_TRUE(validate_format(e["payload"]["text"].get<std::string>()).empty()) << e;
  EXPECT_EQ(r.latency.size(), ex.size());
  for (const auto& rec : r.latency) EXPECT_TRUE(additive(rec));
}

TEST(RunScenario, ExecutedPathRespectsConstraints) {
  const Scenario s = hallway();
  for (bool explain : {false, true}) {
    const auto r = run_scenario(s, opts(explain, 2));
    ASSERT_EQ(r.history.size(), r.human_history.size());
    for (std::size_t i = 0; i < r.history.size(); ++i) {
      const auto zones = sim::build_social_zones(r.human_history[i], s.constants.d_social, s.constants.group_radius);
      EXPECT_GE(sim::zone_clearance(r.history[i].q.position(), zones), 0.0) << "tick " << i;
    }
    double len = 0.0;
    for (std::size_t i = 1; i < r.history.size(); ++i)
      len += distance(r.history[i].q.position(), r.history[i - 1].q.position());
    EXPECT_NEAR(r.metrics.total_trajectory_m, len, 1e-9 * len);
  }
}

TEST(RunScenario, WithoutExplanationsLateDiscoveryBrakes) {
  const auto woe = run_scenario(hallway(), opts(false, 1));
  const auto we = run_scenario(hallway(), opts(true, 1));
  EXPECT_FALSE(of_kind(woe, "brake").empty());
  EXPECT_GE(woe.metrics.sudden_stops, 1);
  EXPECT_LE(we.metrics.sudden_stops, woe.metrics.sudden_stops);
}

TEST(RunScenario, LabelsPairPredictionWithTruth) {
  const auto r = run_scenario(hallway(), opts(true, 1));
  EXPECT_EQ(r.labels.size(), of_kind(r, "caption").size());
  ASSERT_FALSE(r.labels.empty());
  EXPECT_TRUE(r.labels.front().truth);  // the initial straight plan crosses the pair
}

TEST(RunScenario, EnclosedGoalIsNoPath) {
  Scenario s = corridor();
  s.obstacles = {{8.4, 0.0, 8.6, 3.0}};
  EXPECT_THROW(run_scenario(s, opts(false)), sim::NoPathError);
}

TEST(RunScenario, RemoteBackendNeedsKey) {
  RunOptions o = opts(true);
  o.llm_backend.kind = BackendKind::remote;
  o.llm_backend.endpoint = "http://127.0.0.1:9";
  o.llm_backend.api_key_env = "XNAV_TEST_UNSET_KEY_VAR";
  ::unsetenv("XNAV_TEST_UNSET_KEY_VAR");
  EXPECT_THROW(run_scenario(corridor(), o), ConfigError);
}

TEST(RunScenario, BackendFailureIsLoggedAndNavigationContinues) {
  RunOptions o = opts(true);
  o.caption_backend.kind = BackendKind::remote;
  o.caption_backend.endpoint = "http://127.0.0.1:9";
  o.caption_backend.timeout_s = 0.2;
  o.caption_backend.retry = 1;
  const auto r = run_scenario(corridor(), o);
  EXPECT_TRUE(r.metrics.goal_reached);
  EXPECT_FALSE(of_kind(r, "error").empty());
  EXPECT_EQ(r.explanations, 0u);
}

TEST(Manual, CommandMovesRobotNextTick) {
  Runner runner(corridor(), opts(false, 1, Mode::manual));
  runner.submit(CmdIn{{0.5, 0.0, 0.0}});
  runner.tick();
  const auto snap = runner.snapshot();
  EXPECT_GT(snap["robot"]["x"].get<double>(), 0.8);
  EXPECT_GT(snap["robot"]["speed"].get<double>(), 0.0);
}

TEST(Manual, CommandsAreClampedAndLogged) {
  Runner runner(corridor(), opts(false, 1, Mode::manual));
  runner.submit(CmdIn{{3.0, 4.0, 0.0}});
  for (int i = 0; i < 30; ++i) runner.tick();
  const auto r = runner.finish();
  for (const auto& [t, c] : r.commands) EXPECT_LE(c.speed(), corridor().constants.v_max + 1e-12);
  const auto cmds = of_kind(r, "command");
  ASSERT_EQ(cmds.size(), 1u);
  EXPECT_EQ(cmds[0]["payload"]["vx"], 3.0);
  EXPECT_FALSE(of_kind(r, "warning").empty());
}

TEST(Manual, TriggerCaptureForcesOneCapture) {
  RunOptions o = opts(true, 1, Mode::manual);
  o.trigger = Trigger::manual;
  Runner runner(hallway(), o);
  for (int i = 0; i < 10; ++i) runner.tick();
  runner.submit(CaptureIn{});
  for (int i = 0; i < 40; ++i) runner.tick();
  const auto r = runner.finish();
  EXPECT_EQ(of_kind(r, "capture").size(), 1u);
  EXPECT_EQ(of_kind(r, "explanation").size(), 1u);
}

TEST(Manual, ToggleOffStopsEpsilonAndCaptures) {
  Runner runner(hallway(), opts(true, 1, Mode::manual));
  runner.submit(CmdIn{{0.3, 0.0, 0.0}});
  for (int i = 0; i < 60; ++i) runner.tick();
  EXPECT_GT(runner.snapshot()["epsilon"].get<double>(), 0.0);
  runner.submit(ToggleIn{false});
  runner.tick();
  EXPECT_EQ(runner.snapshot()["epsilon"].get<double>(), 0.0);
  for (int i = 0; i < 80; ++i) runner.tick();
  const auto r = runner.finish();
  EXPECT_EQ(r.metrics.epsilon, 0.0);
  for (const auto& c : of_kind(r, "capture")) EXPECT_LT(c["tick"].get<int>(), 61);
}

TEST(Manual, ApproachingAPersonObeysSocialAccelBound) {
  // Drive straight at a standing person, then slam the brakes inside the
  // social band: the realized deceleration is capped at alpha_social.
  Scenario s = corridor();
  HumanSpec h;
  h.id = 1;
  h.track = {{0.0, 3.0, 1.5}};
  s.humans = {h};
  s.constants.max_time = 20.0;
  std::vector<ScheduledInbound> in{{0, CmdIn{{0.6, 0.0, 0.0}}}, {21, CmdIn{{0.0, 0.0, 0.0}}}};
  const auto r = run_scenario(s, opts(false, 1, Mode::manual), in);
  int band_samples = 0;
  for (std::size_t i = 1; i < r.history.size(); ++i) {
    const double d = sim::nearest_human_distance(r.history[i - 1].q.position(), r.human_history[i - 1]);
    if (d >= s.constants.d_safe && d < s.constants.d_social) {
      ++band_samples;
      EXPECT_LE(r.history[i].a.linear(), s.constants.alpha_social + 1e-9) << "tick " << i;
    }
  }
  EXPECT_GT(band_samples, 0);
  EXPECT_GE(r.metrics.conflicts_detected, 1);
}

TEST(GeneratedScenarios, ExecutedMarginNonNegative) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Scenario s = test::random_scenario(seed);
    const auto r = run_scenario(s, opts(true, seed));
    EXPECT_TRUE(r.metrics.goal_reached) << s.id;
    for (std::size_t i = 0; i < r.history.size(); ++i) {
      const auto zones = sim::build_social_zones(r.human_history[i], s.constants.d_social, s.constants.group_radius);
      EXPECT_GE(sim::zone_clearance(r.history[i].q.position(), zones), 0.0) << s.id << " tick " << i;
    }
  }
}

TEST(RunDir, WritesLayoutAndArtifacts) {
  const fs::path dir = temp_dir("rundir");
  const auto r = run_scenario(hallway(), opts(true, 1), {}, dir);
  for (const char* f : {"run.json", "scenario.json", "events.ndjson", "commands.csv", "latency.csv", "metrics.json",
                        "labels.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  std::size_t pngs = 0, jsons = 0;
  for (const auto& e : fs::directory_iterator(dir / r.run_id)) {
    pngs += e.path().extension() == ".png";
    jsons += e.path().extension() == ".json";
  }
  EXPECT_EQ(jsons, r.explanations);
  EXPECT_EQ(pngs, 2 * r.explanations);
  EXPECT_EQ(read_lines(dir / "events.ndjson"), r.events);
  fs::remove_all(dir);
}

TEST(RunDir, WithoutExplanationsNoArtifacts) {
  const fs::path dir = temp_dir("rundir_woe");
  const auto r = run_scenario(hallway(), opts(false, 1), {}, dir);
  EXPECT_FALSE(fs::exists(dir / r.run_id));
  fs::remove_all(dir);
}

TEST(Replay, ReproducesMockRun) {
  const fs::path dir = temp_dir("replay");
  run_scenario(hallway(), opts(true, 5), {}, dir);
  const auto o = replay_run(dir);
  EXPECT_TRUE(o.identical);
  EXPECT_EQ(o.original_lines, o.replay_lines);
  fs::remove_all(dir);
}

TEST(Replay, ManualRunWithInputs) {
  const fs::path dir = temp_dir("replay_manual");
  std::vector<ScheduledInbound> in{{0, CmdIn{{0.4, 0.0, 0.0}}}, {30, CaptureIn{}}, {40, ToggleIn{false}},
                                   {60, CmdIn{{0.0, 0.0, 0.0}}}};
  run_scenario(corridor(), opts(true, 3, Mode::manual), in, dir);
  EXPECT_TRUE(replay_run(dir).identical);
  fs::remove_all(dir);
}

TEST(Replay, DifferentSeedDiverges) {
  const fs::path dir = temp_dir("replay_seed");
  run_scenario(hallway(), opts(true, 5), {}, dir);
  const auto o = replay_run(dir, 6);
  EXPECT_FALSE(o.identical);
  ASSERT_TRUE(o.first_difference);
  EXPECT_NE(o.original_line, o.replay_line);
  fs::remove_all(dir);
}

TEST(Inbound, JsonRoundTripAndErrors) {
  for (const Inbound& in : {Inbound{CmdIn{{0.5, 0.0, 0.1}}}, Inbound{ToggleIn{true}}, Inbound{CaptureIn{}}}) {
    const auto j = inbound_to_json(in);
    EXPECT_EQ(inbound_to_json(inbound_from_json(j)), j);
  }
  EXPECT_THROW(inbound_from_json(nlohmann::json{{"type", "dance"}}), ParseError);
  EXPECT_THROW(inbound_from_json(nlohmann::json{{"vx", 1}}), ParseError);
  EXPECT_THROW(inbound_from_json(nlohmann::json{{"type", "cmd"}, {"vx", "fast"}}), ParseError);
  EXPECT_THROW(inbound_from_json(nlohmann::json{{"type", "toggle_explainability"}}), ParseError);
}

TEST(Commands, CsvToTicks) {
  const fs::path dir = temp_dir("cmds");
  fs::create_directories(dir);
  std::ofstream(dir / "c.csv") << "t,vx,vy,psidot\n0.0,0.5,0,0\n1.0,0,0,0\n";
  const auto in = read_commands_csv(dir / "c.csv", 0.1);
  ASSERT_EQ(in.size(), 2u);
  EXPECT_EQ(in[1].tick, 10);
  std::ofstream(dir / "bad.csv") << "t,vx\n";
  EXPECT_THROW(read_commands_csv(dir / "bad.csv", 0.1), ParseError);
  fs::remove_all(dir);
}
