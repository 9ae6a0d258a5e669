#include "xnav/sim/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>

#include "xnav/sim/constraints.hpp"

namespace xnav::sim {

double Workspace::obstacle_clearance(Vec2 p) const {
  double c = std::min({p.x - bounds.xmin, bounds.xmax - p.x, p.y - bounds.ymin, bounds.ymax - p.y});
  for (const Rect& r : obstacles) c = std::min(c, r.signed_distance(p));
  return c - robot_radius;
}

namespace {

constexpr double kSampleStep = 0.01;

}  // namespace

bool segment_clear(Vec2 a, Vec2 b, const Workspace& ws, std::span<const SocialZone> zones,
                   double min_obstacle_clearance, double min_zone_clearance) {
  const double len = distance(a, b);
  const int n = std::max(1, static_cast<int>(std::ceil(len / kSampleStep)));
  // Both clearance fields are 1-Lipschitz, so points between samples keep
  // at least (sample clearance - half spacing).
  const double slack = 0.5 * len / n;
  for (int i = 0; i <= n; ++i) {
    const Vec2 p = a + (b - a) * (static_cast<double>(i) / n);
    if (ws.obstacle_clearance(p) - slack < min_obstacle_clearance) return false;
    if (zone_clearance(p, zones) - slack < min_zone_clearance) return false;
  }
  return true;
}

namespace {

struct Grid {
  int nx{0};
  int ny{0};
  double res{0.1};
  Rect bounds;

  int index(int i, int j) const { return j * nx + i; }
  Vec2 center(int i, int j) const {
    return {bounds.xmin + (i + 0.5) * res, bounds.ymin + (j + 0.5) * res};
  }
  std::pair<int, int> cell_of(Vec2 p) const {
    const int i = std::clamp(static_cast<int>(std::floor((p.x - bounds.xmin) / res)), 0, nx - 1);
    const int j = std::clamp(static_cast<int>(std::floor((p.y - bounds.ymin) / res)), 0, ny - 1);
    return {i, j};
  }
};

double corner_speed(Vec2 prev, Vec2 at, Vec2 next, double v_max) {
  const Vec2 d0 = at - prev;
  const Vec2 d1 = next - at;
  const double n0 = d0.norm();
  const double n1 = d1.norm();
  if (n0 == 0.0 || n1 == 0.0) return v_max;
  const double cos_turn = std::clamp(d0.dot(d1) / (n0 * n1), -1.0, 1.0);
  return v_max * std::max(0.1, cos_turn);
}

}  // namespace

Plan profile_path(std::vector<Vec2> path, double t0, double v0, const ScenarioConstants& c) {
  Plan plan;
  // drop zero-length segments
  std::vector<Vec2> pts;
  for (const Vec2& p : path)
    if (pts.empty() || distance(pts.back(), p) > 1e-9) pts.push_back(p);
  if (pts.empty()) throw std::invalid_argument("profile_path: empty path");
  plan.path = pts;

  std::vector<double> vertex_s(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) vertex_s[i] = vertex_s[i - 1] + distance(pts[i - 1], pts[i]);
  const double total = vertex_s.back();

  auto pose_at = [&](double s) {
    if (pts.size() == 1) return Pose{pts[0].x, pts[0].y, 0.0};
    auto it = std::upper_bound(vertex_s.begin(), vertex_s.end(), s);
    std::size_t k = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - vertex_s.begin(), 1,
                                                                        static_cast<std::ptrdiff_t>(pts.size() - 1)));
    const Vec2 a = pts[k - 1];
    const Vec2 b = pts[k];
    const double seg = vertex_s[k] - vertex_s[k - 1];
    const double u = seg > 0.0 ? std::clamp((s - vertex_s[k - 1]) / seg, 0.0, 1.0) : 0.0;
    const Vec2 p = a + (b - a) * u;
    return Pose{p.x, p.y, std::atan2(b.y - a.y, b.x - a.x)};
  };

  if (total <= 1e-9) {
    plan.samples.push_back({t0, 0.0, pose_at(0.0), {}});
    return plan;
  }

  std::vector<double> vertex_limit(pts.size(), c.v_max);
  for (std::size_t i = 1; i + 1 < pts.size(); ++i)
    vertex_limit[i] = corner_speed(pts[i - 1], pts[i], pts[i + 1], c.v_max);
  vertex_limit.back() = 0.0;

  const double a = c.a_nominal;
  constexpr double kCreep = 0.02;
  constexpr double kBrakeShare = 0.9;  // envelope slack for the discrete braking step
  auto limit_at = [&](double s) {
    double lim = c.v_max;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (vertex_s[k] < s) continue;
      lim = std::min(lim, std::sqrt(vertex_limit[k] * vertex_limit[k] + 2.0 * kBrakeShare * a * (vertex_s[k] - s)));
    }
    return std::max(lim, kCreep);
  };

  const double dt = c.dt;
  double s = 0.0;
  double v = std::clamp(v0, 0.0, limit_at(0.0));
  double t = t0;
  auto push = [&](double ss, double vv, double tt) {
    const Pose p = pose_at(ss);
    plan.samples.push_back({tt, ss, p, Vec2{std::cos(p.psi), std::sin(p.psi)} * vv});
  };
  push(s, v, t);
  const std::size_t max_steps = static_cast<std::size_t>(10.0 * total / (kCreep * dt)) + 10;
  for (std::size_t step = 0; step < max_steps; ++step) {
    double v_new = std::min(v + a * dt, c.v_max);
    double s_new = s + 0.5 * (v + v_new) * dt;
    const double lim = limit_at(s_new);
    if (v_new > lim) {
      v_new = std::max(lim, v - a * dt);
      s_new = s + 0.5 * (v + v_new) * dt;
    }
    t += dt;
    if (s_new >= total) {
      push(total, 0.0, t);
      return plan;
    }
    s = s_new;
    v = v_new;
    push(s, v, t);
  }
  push(total, 0.0, t + dt);
  return plan;
}

Plan plan_path(const Pose& start, const Pose& goal, std::span<const SocialZone> zones,
               const Workspace& ws, const ScenarioConstants& constants, double t0, double v0,
               const PlannerConfig& cfg) {
  Grid g;
  g.res = cfg.resolution;
  g.bounds = ws.bounds;
  g.nx = std::max(1, static_cast<int>(std::ceil(ws.bounds.width() / g.res)));
  g.ny = std::max(1, static_cast<int>(std::ceil(ws.bounds.height() / g.res)));

  const Vec2 sp = start.position();
  const Vec2 gp = goal.position();
  const bool escape = zone_clearance(sp, zones) < 0.0;

  // Cells closer than `certify` may let a straight move between adjacent
  // centres touch the boundary, so they are never entered (except when
  // escaping a zone we already occupy).
  const double certify = g.res * std::sqrt(0.5) + 1e-3;
  const int n = g.nx * g.ny;
  constexpr double kBlocked = std::numeric_limits<double>::infinity();
  std::vector<double> weight(static_cast<std::size_t>(n), 1.0);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const Vec2 p = g.center(i, j);
      const double oc = ws.obstacle_clearance(p);
      const double zc = zone_clearance(p, zones);
      double w = 1.0;
      if (oc <= certify) {
        w = kBlocked;
      } else if (zc <= certify) {
        w = escape ? cfg.escape_cost : kBlocked;
      } else if (oc <= cfg.obstacle_margin || zc <= cfg.zone_margin) {
        w = cfg.soft_cost;
      }
      weight[static_cast<std::size_t>(g.index(i, j))] = w;
    }
  }

  const auto [si, sj] = g.cell_of(sp);
  const auto [gi, gj] = g.cell_of(gp);
  const int s_idx = g.index(si, sj);
  const int g_idx = g.index(gi, gj);
  if (ws.obstacle_clearance(gp) <= 0.0 || zone_clearance(gp, zones) <= 0.0 ||
      weight[static_cast<std::size_t>(g_idx)] == kBlocked)
    throw NoPathError("goal is blocked");

  std::vector<double> cost(static_cast<std::size_t>(n), kBlocked);
  std::vector<int> parent(static_cast<std::size_t>(n), -1);
  std::vector<char> closed(static_cast<std::size_t>(n), 0);
  auto heuristic = [&](int idx) {
    const int i = idx % g.nx;
    const int j = idx / g.nx;
    return std::hypot(static_cast<double>(i - gi), static_cast<double>(j - gj)) * g.res;
  };
  using Entry = std::tuple<double, double, int>;  // f, h, index: deterministic order
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  cost[static_cast<std::size_t>(s_idx)] = 0.0;
  open.emplace(heuristic(s_idx), heuristic(s_idx), s_idx);
  bool found = false;
  while (!open.empty()) {
    const auto [f, h, cur] = open.top();
    open.pop();
    if (closed[static_cast<std::size_t>(cur)]) continue;
    closed[static_cast<std::size_t>(cur)] = 1;
    if (cur == g_idx) {
      found = true;
      break;
    }
    const int ci = cur % g.nx;
    const int cj = cur / g.nx;
    for (int dj = -1; dj <= 1; ++dj) {
      for (int di = -1; di <= 1; ++di) {
        if (di == 0 && dj == 0) continue;
        const int ni = ci + di;
        const int nj = cj + dj;
        if (ni < 0 || nj < 0 || ni >= g.nx || nj >= g.ny) continue;
        const int nb = g.index(ni, nj);
        const double w = weight[static_cast<std::size_t>(nb)];
        if (w == kBlocked || closed[static_cast<std::size_t>(nb)]) continue;
        const double step = (di != 0 && dj != 0 ? std::sqrt(2.0) : 1.0) * g.res * w;
        const double c = cost[static_cast<std::size_t>(cur)] + step;
        if (c < cost[static_cast<std::size_t>(nb)]) {
          cost[static_cast<std::size_t>(nb)] = c;
          parent[static_cast<std::size_t>(nb)] = cur;
          const double hn = heuristic(nb);
          open.emplace(c + hn, hn, nb);
        }
      }
    }
  }
  if (!found) throw NoPathError("no path from start to goal on the planning grid");

  std::vector<Vec2> raw;
  for (int idx = g_idx; idx != -1; idx = parent[static_cast<std::size_t>(idx)])
    raw.push_back(g.center(idx % g.nx, idx / g.nx));
  std::reverse(raw.begin(), raw.end());
  raw.front() = sp;
  if (raw.size() == 1) raw.push_back(gp);
  else raw.back() = gp;

  // Greedy shortcutting; only segments that keep the preferred margins.
  std::vector<Vec2> smooth{raw.front()};
  std::size_t i = 0;
  while (i + 1 < raw.size()) {
    std::size_t next = i + 1;
    for (std::size_t j = raw.size() - 1; j > i + 1; --j) {
      if (segment_clear(raw[i], raw[j], ws, zones, cfg.obstacle_margin, cfg.zone_margin)) {
        next = j;
        break;
      }
    }
    smooth.push_back(raw[next]);
    i = next;
  }

  Plan plan = profile_path(std::move(smooth), t0, v0, constants);
  plan.escape = escape;
  if (!escape) {
    // Soundness gate: the profiled samples lie on the verified polyline.
    for (std::size_t k = 1; k < plan.path.size(); ++k)
      if (!segment_clear(plan.path[k - 1], plan.path[k], ws, zones, 0.0, 0.0) &&
          !(k == 1 && (ws.obstacle_clearance(sp) <= certify || zone_clearance(sp, zones) <= certify)))
        throw NoPathError("planned path failed clearance verification");
    if (conflict_margin(plan, zones) < 0.0) throw NoPathError("planned path enters a social zone");
  }
  return plan;
}

}  // namespace xnav::sim
