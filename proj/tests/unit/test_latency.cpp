#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "xnav/core/rng.hpp"
#include "xnav/latency/clock.hpp"
#include "xnav/latency/latency.hpp"

using namespace xnav;

TEST(StageTimer, MeasuresSleep) {
  SteadyClock clock;
  LatencyRecord r;
  auto t = time_stage(Stage::caption, [] { std::this_thread::sleep_for(std::chrono::milliseconds(50)); }, clock, &r);
  EXPECT_GE(t.seconds, 0.050);
  EXPECT_LT(t.seconds, 0.5);
  ASSERT_TRUE(r.t_caption_s);
  EXPECT_DOUBLE_EQ(*r.t_caption_s, t.seconds);
}

TEST(StageTimer, ZeroWorkIsNonNegative) {
  SteadyClock clock;
  auto t = time_stage(Stage::camera, [] { return 7; }, clock);
  EXPECT_EQ(t.value, 7);
  EXPECT_GE(t.seconds, 0.0);
}

TEST(StageTimer, VirtualClockIsExact) {
  VirtualClock clock(10.0);
  auto t = time_stage(Stage::heatmap, [&] { clock.sleep_for(1.25); }, clock);
  EXPECT_DOUBLE_EQ(t.seconds, 1.25);
}

TEST(StageTimer, NestedTimingThrows) {
  VirtualClock clock;
  EXPECT_THROW(time_stage(Stage::caption, [&] { time_stage(Stage::camera, [] {}, clock); }, clock), Error);
  // the guard is released after the failure
  EXPECT_NO_THROW(time_stage(Stage::camera, [] {}, clock));
}

TEST(LatencyTotal, SumsStages) {
  LatencyRecord r;
  r.t_camera_s = 0.1;
  r.t_caption_s = 2.0;
  r.t_heatmap_s = 0.5;
  set_llm(r, 1.0, 3.0);
  EXPECT_NEAR(total(r), 6.6, 1e-12);
  EXPECT_TRUE(additive(r));
  r.total_s += 1e-6;
  EXPECT_FALSE(additive(r));
}

TEST(LatencyTotal, MissingStageNamesField) {
  LatencyRecord r;
  r.t_camera_s = 0.1;
  r.t_caption_s = 2.0;
  r.t_heatmap_s = 0.5;
  try {
    total(r);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("t_llm_s"), std::string::npos);
  }
}

namespace {

LatencyConfig example_config() {
  LatencyConfig c;
  c.stage_options[Stage::camera] = {{"cam", 0.1, "std"}};
  c.stage_options[Stage::caption] = {{"blip_base", 2.0, "std"}, {"blip_large", 4.0, "high"}};
  c.stage_options[Stage::heatmap] = {{"gradcam", 0.5, "std"}};
  c.stage_options[Stage::llm] = {{"gpt_small", 3.0, "std"}, {"gpt_large", 8.0, "high"}};
  c.lambda = {{"std", 0.0}, {"high", 1.0}};
  c.t_max_s = 25.0;
  return c;
}

struct Pick {
  double total;
  double quality;
  std::vector<std::string> ids;
};

// Exhaustive enumeration; lexicographic (total asc, quality desc, ids asc).
std::optional<Pick> brute_force(const LatencyConfig& c) {
  std::optional<Pick> best;
  std::vector<std::size_t> idx(4, 0);
  for (;;) {
    Pick p{0.0, 0.0, {}};
    for (std::size_t s = 0; s < 4; ++s) {
      const StageOption& o = c.stage_options.at(kStages[s])[idx[s]];
      p.total += o.expected_latency_s;
      auto it = c.lambda.find(o.quality_tag);
      p.quality += it == c.lambda.end() ? 0.0 : it->second;
      p.ids.push_back(o.option_id);
    }
    p.total /= c.compute_factor;
    if (p.total <= c.t_max_s) {
      bool better = !best || p.total < best->total ||
                    (p.total == best->total &&
                     (p.quality > best->quality || (p.quality == best->quality && p.ids < best->ids)));
      if (better) best = p;
    }
    std::size_t s = 0;
    while (s < 4 && ++idx[s] == c.stage_options.at(kStages[s]).size()) idx[s++] = 0;
    if (s == 4) break;
  }
  return best;
}

}  // namespace

TEST(SelectConfig, PicksFastestOptions) {
  const Selection s = select_config(example_config());
  EXPECT_NEAR(s.total_s, 5.6, 1e-12);
  EXPECT_EQ(s.chosen.at(Stage::caption).option_id, "blip_base");
  EXPECT_EQ(s.chosen.at(Stage::llm).option_id, "gpt_small");
}

TEST(SelectConfig, InfeasibleReportsMinimum) {
  LatencyConfig c = example_config();
  c.t_max_s = 2.0;
  try {
    select_config(c);
    FAIL();
  } catch (const InfeasibleBudget& e) {
    EXPECT_NEAR(e.min_total(), 5.6, 1e-12);
  }
}

TEST(SelectConfig, ComputeFactorScales) {
  LatencyConfig c = example_config();
  c.t_max_s = 3.0;
  EXPECT_THROW(select_config(c), InfeasibleBudget);
  c.compute_factor = 2.0;
  EXPECT_NEAR(select_config(c).total_s, 2.8, 1e-12);
}

TEST(SelectConfig, TieBreaksOnQuality) {
  LatencyConfig c = example_config();
  c.stage_options[Stage::caption].push_back({"blip_alt", 2.0, "high"});
  EXPECT_EQ(select_config(c).chosen.at(Stage::caption).option_id, "blip_alt");
}

TEST(SelectConfig, MissingStageIsInvalid) {
  LatencyConfig c = example_config();
  c.stage_options.erase(Stage::heatmap);
  EXPECT_THROW(select_config(c), ValidationError);
}

TEST(SelectConfig, MatchesExhaustiveSearch) {
  Rng rng(42);
  const std::vector<std::string> tags{"a", "b", "c"};
  int feasible = 0;
  for (int trial = 0; trial < 200; ++trial) {
    LatencyConfig c;
    for (Stage s : kStages) {
      const std::size_t n = 1 + rng.index(4);
      for (std::size_t k = 0; k < n; ++k)
        c.stage_options[s].push_back({"o" + std::to_string(rng.index(6)), 0.5 * static_cast<double>(1 + rng.index(8)),
                                      tags[rng.index(tags.size())]});
    }
    for (const auto& t : tags) c.lambda[t] = static_cast<double>(rng.index(3));
    c.t_max_s = 0.5 * static_cast<double>(4 + rng.index(16));
    c.compute_factor = rng.index(2) ? 1.0 : 2.0;
    const auto oracle = brute_force(c);
    if (!oracle) {
      EXPECT_THROW(select_config(c), InfeasibleBudget) << "trial " << trial;
      continue;
    }
    ++feasible;
    const Selection s = select_config(c);
    EXPECT_DOUBLE_EQ(s.total_s, oracle->total) << "trial " << trial;
    EXPECT_DOUBLE_EQ(s.quality, oracle->quality) << "trial " << trial;
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(s.chosen.at(kStages[k]).option_id, oracle->ids[k]) << "trial " << trial;
  }
  EXPECT_GT(feasible, 50);
}

TEST(TriggerStats, SyntheticWorkloadMatchesTargets) {
  const auto totals = synthetic_totals();
  ASSERT_EQ(totals.size(), 88u);
  std::vector<LatencyRecord> recs;
  for (std::size_t i = 0; i < totals.size(); ++i) recs.push_back(split_total(totals[i], Trigger::fixed_interval, i + 1));
  const auto stats = trigger_stats(recs).at(Trigger::fixed_interval);
  EXPECT_EQ(stats.count, 88u);
  EXPECT_NEAR(stats.min, 5.986, 1e-9);
  EXPECT_NEAR(stats.max, 50.688, 1e-9);
  EXPECT_NEAR(stats.mean, 20.0, 1e-6);
  for (const auto& r : recs) EXPECT_TRUE(additive(r));
}

TEST(TriggerStats, NearestRankAndThreshold) {
  std::vector<double> v(20);
  std::iota(v.begin(), v.end(), 1.0);  // 1..20
  const auto s = summarize_totals(v, 15.0);
  EXPECT_DOUBLE_EQ(s.p95, 19.0);  // ceil(0.95*20) = 19th value
  EXPECT_DOUBLE_EQ(s.fraction_above, 0.25);
  EXPECT_DOUBLE_EQ(s.mean, 10.5);
}

TEST(TriggerStats, SingleRecord) {
  const auto r = split_total(12.0, Trigger::manual, 1);
  const auto s = trigger_stats(std::span(&r, 1)).at(Trigger::manual);
  EXPECT_EQ(s.count, 1u);
  EXPECT_DOUBLE_EQ(s.mean, 12.0);
  EXPECT_DOUBLE_EQ(s.min, 12.0);
  EXPECT_DOUBLE_EQ(s.max, 12.0);
  EXPECT_DOUBLE_EQ(s.p95, 12.0);
}

TEST(TriggerStats, EmptyThrows) {
  EXPECT_THROW(trigger_stats(std::span<const LatencyRecord>{}), ValidationError);
}

TEST(LatencyCsv, RoundTrip) {
  std::vector<LatencyRecord> recs{split_total(10.5, Trigger::conflict_event, 1, "run_a"),
                                  split_total(22.25, Trigger::fixed_interval, 2, "run_a")};
  std::stringstream ss;
  write_latency_csv(ss, recs);
  const auto back = read_latency_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].run_id, recs[i].run_id);
    EXPECT_EQ(back[i].seq, recs[i].seq);
    EXPECT_EQ(back[i].trigger, recs[i].trigger);
    EXPECT_NEAR(back[i].total_s, recs[i].total_s, 1e-6);
    EXPECT_NEAR(*back[i].t_llm_s, *recs[i].t_llm_s, 2e-6);
  }
}

TEST(LatencyCsv, RejectsBadHeader) {
  std::stringstream ss("a,b,c\n");
  EXPECT_THROW(read_latency_csv(ss), ParseError);
}

TEST(Trigger, NamesRoundTrip) {
  for (Trigger t : {Trigger::fixed_interval, Trigger::manual, Trigger::conflict_event})
    EXPECT_EQ(trigger_from_string(to_string(t)), t);
  EXPECT_THROW(trigger_from_string("sometimes"), ParseError);
}

TEST(LatencyProfile, HostedProfileMeanNearTwenty) {
  const auto p = LatencyProfile::hosted();
  Rng rng(7);
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i)
    for (Stage s : kStages) sum += p.draw(s, rng);
  EXPECT_NEAR(sum / n, 20.0, 1.0);
  EXPECT_THROW(LatencyProfile::by_name("warp"), ConfigError);
}

TEST(TriggerStudy, EventTriggeringQueuesLess) {
  const auto service = synthetic_totals();
  const double horizon = 3600.0;
  Rng r1(derive_seed(3, "latency.fixed")), r2(derive_seed(3, "latency.event"));
  const auto fixed = simulate_triggers(interval_requests(25.0, horizon), Trigger::fixed_interval, service, r1);
  const auto event =
      simulate_triggers(event_requests(30.0, 90.0, horizon, r2), Trigger::conflict_event, service, r2);
  const auto fs = summarize_totals([&] {
    std::vector<double> v;
    for (const auto& r : fixed) v.push_back(r.total_s);
    return v;
  }());
  const auto es = summarize_totals([&] {
    std::vector<double> v;
    for (const auto& r : event) v.push_back(r.total_s);
    return v;
  }());
  EXPECT_LT(es.mean, fs.mean);
  EXPECT_LT(es.fraction_above, fs.fraction_above);
  for (const auto& r : fixed) EXPECT_TRUE(additive(r));
}
