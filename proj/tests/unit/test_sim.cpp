#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "xnav/core/error.hpp"
#include "xnav/core/rng.hpp"
#include "xnav/sim/constraints.hpp"
#include "xnav/sim/metrics.hpp"
#include "xnav/sim/world.hpp"
#include "xnav/sim/zones.hpp"

using namespace xnav;
using namespace xnav::sim;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

HumanConfig human(int id, double x, double y, Activity a = Activity::idle,
                  std::optional<int> group = std::nullopt) {
  HumanConfig h;
  h.id = id;
  h.pose = {x, y, 0.0};
  h.activity = a;
  h.group_id = group;
  return h;
}

RobotState robot_at(double x, double y) {
  RobotState r;
  r.q = {x, y, 0.0};
  return r;
}

// Independent membership oracle: point inside a disc, or inside the
// rectangle-plus-caps shape swept between two centres.
bool oracle_inside(Vec2 p, const std::vector<HumanConfig>& hs, double pr, double gr) {
  for (const auto& h : hs)
    if (std::hypot(p.x - h.pose.x, p.y - h.pose.y) < pr) return true;
  for (std::size_t i = 0; i < hs.size(); ++i)
    for (std::size_t j = i + 1; j < hs.size(); ++j) {
      if (!hs[i].group_id || hs[i].group_id != hs[j].group_id) continue;
      if (hs[i].activity != Activity::conversing || hs[j].activity != Activity::conversing) continue;
      const double ax = hs[i].pose.x, ay = hs[i].pose.y;
      const double bx = hs[j].pose.x, by = hs[j].pose.y;
      const double len = std::hypot(bx - ax, by - ay);
      const double ux = (bx - ax) / len, uy = (by - ay) / len;
      const double along = (p.x - ax) * ux + (p.y - ay) * uy;
      const double across = std::abs(-(p.x - ax) * uy + (p.y - ay) * ux);
      if (along >= 0 && along <= len && across < gr) return true;
      if (std::hypot(p.x - ax, p.y - ay) < gr || std::hypot(p.x - bx, p.y - by) < gr) return true;
    }
  return false;
}

Scenario open_scenario() {
  Scenario s;
  s.id = "open";
  s.bounds = {0, 0, 20, 10};
  s.robot_start = {1, 5, 0};
  s.goal = {19, 5, 0};
  s.constants.v_max = 1.0;
  return s;
}

}  // namespace

TEST(DistanceConstraint, MatchesWorkedValues) {
  std::vector<HumanConfig> hs{human(1, 1.0, 0.0)};
  EXPECT_NEAR(distance_constraint_margin(robot_at(0, 0), hs, 0.5, 1.2), -0.2, 1e-12);
  hs[0].pose.x = 2.0;
  EXPECT_NEAR(distance_constraint_margin(robot_at(0, 0), hs, 0.5, 1.2), 0.8, 1e-12);
  EXPECT_EQ(distance_constraint_margin(robot_at(0, 0), {}, 0.5, 1.2), kInf);
}

TEST(AccelBound, ThreeBands) {
  EXPECT_FALSE(accel_bound(2.0, 0.5, 1.2, 0.5).has_value());
  ASSERT_TRUE(accel_bound(0.8, 0.5, 1.2, 0.5).has_value());
  EXPECT_DOUBLE_EQ(*accel_bound(0.8, 0.5, 1.2, 0.5), 0.5);
  EXPECT_FALSE(accel_bound(0.3, 0.5, 1.2, 0.5).has_value());
  EXPECT_FALSE(accel_bound(1.2, 0.5, 1.2, 0.5).has_value());
  EXPECT_TRUE(accel_bound(0.5, 0.5, 1.2, 0.5).has_value());
  EXPECT_THROW(accel_bound(0.8, 1.0, 0.5, 0.5), ValidationError);
}

TEST(SocialZones, ConversingPairGetsCapsule) {
  std::vector<HumanConfig> hs{human(1, 0, 0, Activity::conversing, 7),
                              human(2, 2, 0, Activity::conversing, 7)};
  auto zones = build_social_zones(hs, 1.2, 0.6);
  ASSERT_EQ(zones.size(), 3u);
  EXPECT_EQ(zones[0].kind, ZoneKind::personal_disc);
  EXPECT_EQ(zones[1].kind, ZoneKind::personal_disc);
  EXPECT_EQ(zones[2].kind, ZoneKind::group_interaction);
  EXPECT_EQ(zones[2].member_ids, (std::vector<int>{1, 2}));
  EXPECT_TRUE(zones[2].contains({1.0, 0.0}));
}

TEST(SocialZones, TrivialCases) {
  std::vector<HumanConfig> one{human(1, 0, 0)};
  auto zones = build_social_zones(one, 1.2, 0.6);
  ASSERT_EQ(zones.size(), 1u);
  EXPECT_EQ(zones[0].kind, ZoneKind::personal_disc);
  EXPECT_TRUE(build_social_zones({}, 1.2, 0.6).empty());
  EXPECT_EQ(zone_clearance({0, 0}, {}), kInf);
}

TEST(SocialZones, MembershipMatchesBruteForceOracle) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    std::vector<HumanConfig> hs;
    const int n = 1 + static_cast<int>(rng.index(4));
    for (int i = 0; i < n; ++i) {
      const bool conv = rng.uniform() < 0.6;
      hs.push_back(human(i + 1, rng.uniform(0, 8), rng.uniform(0, 8),
                         conv ? Activity::conversing : Activity::walking,
                         conv ? std::optional<int>(1) : std::nullopt));
    }
    // A group must have at least two members to be valid scenario input.
    int conv_count = 0;
    for (auto& h : hs) conv_count += h.activity == Activity::conversing;
    if (conv_count == 1)
      for (auto& h : hs) {
        h.activity = Activity::idle;
        h.group_id.reset();
      }
    const double pr = rng.uniform(0.5, 1.5);
    const double gr = rng.uniform(0.3, 1.0);
    auto zones = build_social_zones(hs, pr, gr);
    for (int k = 0; k < 2000; ++k) {
      Vec2 p{rng.uniform(-2, 10), rng.uniform(-2, 10)};
      const bool expect = oracle_inside(p, hs, pr, gr);
      bool got = false;
      for (auto& z : zones) got = got || z.contains(p);
      // Skip points within 1e-9 of a boundary.
      if (std::abs(zone_clearance(p, zones)) < 1e-9) continue;
      ASSERT_EQ(got, expect) << "seed " << seed << " p=(" << p.x << "," << p.y << ")";
      EXPECT_EQ(got, zone_clearance(p, zones) < 0.0);
    }
  }
}

TEST(ConflictMargin, ThroughCapsuleIsNegative) {
  std::vector<HumanConfig> hs{human(1, 5, 0, Activity::conversing, 1),
                              human(2, 5, 2, Activity::conversing, 1)};
  auto zones = build_social_zones(hs, 0.3, 0.6);
  Plan plan;
  for (int i = 0; i <= 100; ++i) {
    PlanSample s;
    s.t = i * 0.1;
    s.pose = {i * 0.1, 1.0, 0.0};
    plan.samples.push_back(s);
  }
  const double h = conflict_margin(plan, zones);
  EXPECT_LT(h, 0.0);
  // Dense sampling oracle.
  double dense = kInf;
  for (int i = 0; i <= 10000; ++i) {
    const Vec2 p{i * 0.001, 1.0};
    for (auto& hu : hs) dense = std::min(dense, std::hypot(p.x - hu.pose.x, p.y - hu.pose.y) - 0.3);
    dense = std::min(dense, std::abs(p.x - 5.0) - 0.6);
  }
  EXPECT_NEAR(h, dense, 1e-9);
}

TEST(ConflictMargin, FarPlanAndEmptyZones) {
  std::vector<HumanConfig> hs{human(1, 0, 10)};
  auto zones = build_social_zones(hs, 1.2, 0.6);
  Plan plan;
  for (int i = 0; i < 20; ++i) {
    PlanSample s;
    s.pose = {i * 0.5, 0.0, 0.0};
    plan.samples.push_back(s);
  }
  EXPECT_GE(conflict_margin(plan, zones), 1.0);
  EXPECT_EQ(conflict_margin(plan, {}), kInf);
  EXPECT_THROW(conflict_margin(Plan{}, zones), std::invalid_argument);
  EXPECT_EQ(conflict_margin(plan, zones, plan.samples.size()), kInf);
}

TEST(Step, ZeroCommandFromRestHolds) {
  auto w = make_world(open_scenario(), 0);
  auto n = step(w, {0, 0, 0}, 0.1);
  EXPECT_EQ(n.robot.q, w.robot.q);
  EXPECT_EQ(n.tick, 1);
  EXPECT_NEAR(n.robot.t, 0.1, 1e-12);
}

TEST(Step, ConstantVelocityIntegrates) {
  auto w = make_world(open_scenario(), 0);
  const double x0 = w.robot.q.x;
  for (int i = 0; i < 10; ++i) w = step(w, {1.0, 0, 0}, 0.1);
  EXPECT_NEAR(w.robot.q.x - x0, 1.0, 1e-9);
  EXPECT_NEAR(w.robot.q.y, 5.0, 1e-12);
}

TEST(Step, AccelClampedInsideSocialBand) {
  Scenario s = open_scenario();
  HumanSpec hs;
  hs.id = 1;
  hs.track = {{0.0, 1.0, 5.8}};  // 0.8 m from the robot
  s.humans.push_back(hs);
  auto w = make_world(s, 0);
  auto n = step(w, {0.2, 0, 0}, 0.1);  // asks for 2.0 m/s^2
  EXPECT_NEAR(n.robot.a.linear(), 0.5, 1e-12);
  EXPECT_NEAR(n.robot.v.vx, 0.05, 1e-12);
}

TEST(Step, SpeedCappedAtVmax) {
  Scenario s = open_scenario();
  s.constants.v_max = 0.6;
  auto w = make_world(s, 0);
  for (int i = 0; i < 5; ++i) w = step(w, {3.0, 4.0, 0}, 0.1);
  EXPECT_NEAR(w.robot.v.speed(), 0.6, 1e-12);
  auto c = clamp_command({3, 4, 0.2}, 1.0);
  EXPECT_NEAR(c.vx, 0.6, 1e-12);
  EXPECT_NEAR(c.vy, 0.8, 1e-12);
  EXPECT_EQ(c.psidot, 0.2);
}

TEST(Step, JitterIsSeededAndBounded) {
  Scenario s = open_scenario();
  HumanSpec hs;
  hs.id = 1;
  hs.track = {{0.0, 10.0, 5.0}};
  s.humans.push_back(hs);
  s.human_jitter = 0.2;
  auto a = make_world(s, 3);
  auto b = make_world(s, 3);
  auto c = make_world(s, 4);
  EXPECT_EQ(a.humans[0].pose, b.humans[0].pose);
  EXPECT_NE(a.humans[0].pose, c.humans[0].pose);
  EXPECT_LE(std::abs(a.humans[0].pose.x - 10.0), 0.2);
  EXPECT_LE(std::abs(a.humans[0].pose.y - 5.0), 0.2);
}

TEST(SuddenStop, Examples) {
  std::vector<double> constant(50, 0.6);
  EXPECT_EQ(detect_sudden_stop(constant, 0.1, 2.0, 1.0), 0);
  std::vector<double> one{1.0, 1.0, 1.0, 0.0, 0.0, 0.0};
  EXPECT_EQ(detect_sudden_stop(one, 0.1, 2.0, 1.0), 1);
  std::vector<double> two;
  for (int k = 0; k < 2; ++k) {
    for (int i = 0; i < 5; ++i) two.push_back(1.0);
    for (int i = 0; i < 15; ++i) two.push_back(0.0);
  }
  EXPECT_EQ(detect_sudden_stop(two, 0.1, 2.0, 1.0), 2);
  EXPECT_EQ(detect_sudden_stop(two, 0.1, 2.0, 5.0), 1);
  // Gentle deceleration is not a sudden stop.
  std::vector<double> gentle;
  for (int i = 0; i <= 12; ++i) gentle.push_back(0.6 - 0.05 * i);
  EXPECT_EQ(detect_sudden_stop(gentle, 0.1, 2.0, 1.0), 0);
  // Hard slow-down that never reaches rest.
  std::vector<double> dip{1.0, 0.5, 0.5, 0.5};
  EXPECT_EQ(detect_sudden_stop(dip, 0.1, 2.0, 1.0), 0);
}

TEST(Metrics, JsonRoundTripAndTrajectory) {
  RunMetrics m{"hallway", 5.8, 25.3, 2, 1, true, 0.75};
  EXPECT_EQ(metrics_from_json(metrics_to_json(m)), m);
  std::vector<RobotState> hist{robot_at(0, 0), robot_at(3, 4), robot_at(3, 5)};
  EXPECT_NEAR(trajectory_length(hist), 6.0, 1e-12);
  EXPECT_EQ(trajectory_length({}), 0.0);
}
