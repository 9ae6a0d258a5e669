#include "xnav/sim/world.hpp"

#include <algorithm>
#include <limits>

#include "xnav/core/rng.hpp"
#include "xnav/sim/constraints.hpp"

namespace xnav::sim {

namespace {

std::vector<HumanConfig> humans_at(const Scenario& s, double t) {
  std::vector<HumanConfig> out;
  out.reserve(s.humans.size());
  for (const HumanSpec& h : s.humans) out.push_back(human_at(h, t));
  return out;
}

}  // namespace

WorldState make_world(const Scenario& scenario, std::uint64_t seed) {
  auto jittered = std::make_shared<Scenario>(scenario);
  if (scenario.human_jitter > 0.0) {
    Rng rng(derive_seed(seed, "sim.human_jitter"));
    for (HumanSpec& h : jittered->humans) {
      const double dx = rng.uniform(-scenario.human_jitter, scenario.human_jitter);
      const double dy = rng.uniform(-scenario.human_jitter, scenario.human_jitter);
      for (Waypoint& w : h.track) {
        w.x += dx;
        w.y += dy;
      }
    }
  }
  WorldState w;
  w.scenario = jittered;
  w.robot.q = scenario.robot_start;
  w.robot.q.psi = normalize_angle(w.robot.q.psi);
  w.humans = humans_at(*jittered, 0.0);
  return w;
}

VelocityCommand clamp_command(VelocityCommand cmd, double v_max) {
  const double speed = std::hypot(cmd.vx, cmd.vy);
  if (speed > v_max && speed > 0.0) {
    const double k = v_max / speed;
    cmd.vx *= k;
    cmd.vy *= k;
  }
  return cmd;
}

WorldState step(const WorldState& world, const VelocityCommand& command, double dt) {
  const ScenarioConstants& c = world.scenario->constants;
  const VelocityCommand cmd = clamp_command(command, c.v_max);
  const RobotState& r = world.robot;

  const Vec2 v_cur = rotate({r.v.vx, r.v.vy}, r.q.psi);
  const Vec2 v_des = rotate({cmd.vx, cmd.vy}, r.q.psi);
  Vec2 accel = (v_des - v_cur) * (1.0 / dt);
  const double d_human = nearest_human_distance(r.q.position(), world.humans);
  if (auto bound = accel_bound(d_human, c.d_safe, c.d_social, c.alpha_social)) {
    const double mag = accel.norm();
    if (mag > *bound) accel = accel * (*bound / mag);
  }
  Vec2 v_new = v_cur + accel * dt;
  const double speed = v_new.norm();
  if (speed > c.v_max) v_new = v_new * (c.v_max / speed);

  WorldState next;
  next.scenario = world.scenario;
  next.tick = world.tick + 1;
  RobotState& n = next.robot;
  n.t = r.t + dt;
  n.q.x = r.q.x + v_new.x * dt;
  n.q.y = r.q.y + v_new.y * dt;
  n.q.psi = normalize_angle(r.q.psi + cmd.psidot * dt);
  const Vec2 v_local = rotate(v_new, -n.q.psi);
  n.v = {v_local.x, v_local.y, cmd.psidot};
  const Vec2 realized = (v_new - v_cur) * (1.0 / dt);
  n.a = {realized.x, realized.y, (cmd.psidot - r.v.psidot) / dt};
  next.humans = humans_at(*world.scenario, n.t);
  return next;
}

int detect_sudden_stop(std::span<const double> speeds, double dt, double decel_threshold,
                       double window, double stop_speed) {
  int count = 0;
  double last_end = -std::numeric_limits<double>::infinity();
  std::size_t i = 1;
  while (i < speeds.size()) {
    if ((speeds[i - 1] - speeds[i]) / dt <= decel_threshold) {
      ++i;
      continue;
    }
    const std::size_t begin = i;
    bool stopped = false;
    while (i < speeds.size() && (speeds[i - 1] - speeds[i]) / dt > decel_threshold) {
      stopped = stopped || speeds[i] < stop_speed;
      ++i;
    }
    const double t_begin = static_cast<double>(begin) * dt;
    const double t_end = static_cast<double>(i - 1) * dt;
    if (stopped) {
      if (t_begin - last_end >= window) ++count;
      last_end = t_end;
    }
  }
  return count;
}

}  // namespace xnav::sim
