#include "xnav/runner/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "xnav/bus/topics.hpp"
#include "xnav/core/error.hpp"
#include "xnav/sim/constraints.hpp"
#include "xnav/sim/zones.hpp"

namespace xnav {

using nlohmann::ordered_json;

std::string_view to_string(Mode m) { return m == Mode::manual ? "manual" : "autonomous"; }

Mode mode_from_string(std::string_view s) {
  if (s == "manual") return Mode::manual;
  if (s == "autonomous") return Mode::autonomous;
  throw ParseError("unknown mode '" + std::string(s) + "'");
}

namespace {

double r6(double v) { return std::round(v * 1e6) / 1e6; }
double r4(double v) { return std::round(v * 1e4) / 1e4; }

ordered_json backend_json(const BackendConfig& b) {
  ordered_json j;
  j["kind"] = b.kind == BackendKind::mock ? "mock" : "remote";
  j["endpoint"] = b.endpoint;
  j["timeout_s"] = b.timeout_s;
  j["retry"] = b.retry;
  j["api_key_env"] = b.api_key_env;
  return j;
}

BackendConfig backend_from(const nlohmann::json& j) {
  BackendConfig b;
  b.kind = j.at("kind").get<std::string>() == "remote" ? BackendKind::remote : BackendKind::mock;
  b.endpoint = j.value("endpoint", std::string());
  b.timeout_s = j.value("timeout_s", b.timeout_s);
  b.retry = j.value("retry", b.retry);
  b.api_key_env = j.value("api_key_env", std::string());
  return b;
}

}  // namespace

ordered_json RunOptions::to_json() const {
  ordered_json j;
  j["mode"] = to_string(mode);
  j["explain"] = explain;
  j["trigger"] = to_string(trigger);
  if (capture_interval) j["capture_interval"] = *capture_interval;
  if (seed) j["seed"] = *seed;
  j["latency_profile"] = latency_profile;
  j["caption_backend"] = backend_json(caption_backend);
  j["llm_backend"] = backend_json(llm_backend);
  j["person_rule"] = person_rule;
  j["decel_threshold"] = decel_threshold;
  j["stop_window"] = stop_window;
  j["t_max"] = t_max;
  if (delta_epsilon) j["delta_epsilon"] = *delta_epsilon;
  return j;
}

RunOptions RunOptions::from_json(const nlohmann::json& j) {
  try {
    RunOptions o;
    o.mode = mode_from_string(j.at("mode").get<std::string>());
    o.explain = j.at("explain").get<bool>();
    o.trigger = trigger_from_string(j.at("trigger").get<std::string>());
    if (j.contains("capture_interval")) o.capture_interval = j["capture_interval"].get<double>();
    if (j.contains("seed")) o.seed = j["seed"].get<std::uint64_t>();
    o.latency_profile = j.value("latency_profile", o.latency_profile);
    if (j.contains("caption_backend")) o.caption_backend = backend_from(j["caption_backend"]);
    if (j.contains("llm_backend")) o.llm_backend = backend_from(j["llm_backend"]);
    o.person_rule = j.value("person_rule", o.person_rule);
    o.decel_threshold = j.value("decel_threshold", o.decel_threshold);
    o.stop_window = j.value("stop_window", o.stop_window);
    o.t_max = j.value("t_max", o.t_max);
    if (j.contains("delta_epsilon")) o.delta_epsilon = j["delta_epsilon"].get<double>();
    return o;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("run options: ") + e.what());
  }
}

ordered_json inbound_to_json(const Inbound& in) {
  ordered_json j;
  if (const auto* c = std::get_if<CmdIn>(&in)) {
    j["type"] = "cmd";
    j["vx"] = c->cmd.vx;
    j["vy"] = c->cmd.vy;
    j["psidot"] = c->cmd.psidot;
  } else if (const auto* t = std::get_if<ToggleIn>(&in)) {
    j["type"] = "toggle_explainability";
    j["enabled"] = t->enabled;
  } else {
    j["type"] = "trigger_capture";
  }
  return j;
}

Inbound inbound_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    throw ParseError("inbound message needs a string 'type'");
  const std::string type = j["type"].get<std::string>();
  auto number = [&](const char* k) {
    if (!j.contains(k)) return 0.0;
    if (!j[k].is_number()) throw ParseError(std::string("field '") + k + "' must be a number");
    const double v = j[k].get<double>();
    if (!std::isfinite(v)) throw ParseError(std::string("field '") + k + "' must be finite");
    return v;
  };
  if (type == "cmd") return CmdIn{{number("vx"), number("vy"), number("psidot")}};
  if (type == "toggle_explainability") {
    if (!j.contains("enabled") || !j["enabled"].is_boolean()) throw ParseError("toggle needs boolean 'enabled'");
    return ToggleIn{j["enabled"].get<bool>()};
  }
  if (type == "trigger_capture") return CaptureIn{};
  throw ParseError("unknown message type '" + type + "'");
}

std::string make_run_id(const Scenario& s, const RunOptions& o) {
  return s.id + "_" + std::string(to_string(o.mode)) + "_" + (o.explain ? "we" : "woe") + "_s" +
         std::to_string(o.seed.value_or(s.seed));
}

// ---------------------------------------------------------------------------

struct Runner::Impl {
  enum class Control { follow, brake, hold, finished };

  struct Release {
    double stamp;
    std::uint64_t order;
    Bus::Handle* handle;
    Payload payload;
  };

  struct Capture {
    std::int64_t tick{0};
    double t{0.0};
    LatencyRecord record;
    bool truth{false};
    std::shared_ptr<const Frame> frame;
    std::optional<HeatmapResult> heatmap;
  };

  Impl(Runner& r)
      : self(r),
        sc(r.scenario_),
        c(r.scenario_.constants),
        opt(r.options_),
        seed(r.options_.seed.value_or(r.scenario_.seed)),
        world(sim::make_world(r.scenario_, seed)),
        profile(LatencyProfile::by_name(r.options_.latency_profile)),
        latency_rng(derive_seed(seed, "runner.latency")),
        phrase_rng(derive_seed(seed, "explainer.phrases")),
        cnn(seed),
        rules(eval::default_rules(r.options_.person_rule)),
        pairer(60.0),
        h_camera(r.bus_.advertise(topics::kCameraImage)),
        h_caption(r.bus_.advertise(topics::kCaption)),
        h_heatmap(r.bus_.advertise(topics::kHeatmapSummary)),
        h_explanation(r.bus_.advertise(topics::kExplanation)),
        h_conflict(r.bus_.advertise(topics::kConflict)),
        h_cmd(r.bus_.advertise(topics::kCommand)),
        h_state(r.bus_.advertise(topics::kState)),
        h_metrics(r.bus_.advertise(topics::kMetrics)),
        h_epsilon(r.bus_.advertise(topics::kEpsilon)) {
    opt.caption_backend.validate();
    opt.llm_backend.validate();
    if (opt.caption_backend.kind == BackendKind::remote) (void)opt.caption_backend.api_key();
    if (opt.llm_backend.kind == BackendKind::remote) (void)opt.llm_backend.api_key();
    dt = c.dt;
    explain = opt.explain;
    interval = opt.capture_interval.value_or(sc.capture_interval);
    if (!(interval > 0.0)) throw ValidationError({"capture_interval"}, "capture interval must be positive");
    delta_eps = opt.delta_epsilon.value_or(1.0 / std::max(1, sc.expected_explanations));
    workspace.bounds = world.scenario->bounds;
    workspace.obstacles = world.scenario->obstacles;
    workspace.robot_radius = c.robot_radius;
    known.assign(world.humans.size(), false);
    wire();
    history.push_back(world.robot);
    human_history.push_back(world.humans);

    sense();
    if (opt.mode == Mode::autonomous) {
      // An infeasible start is a domain error for the whole run.
      const auto zones = known_zones();
      plan = sim::plan_path(world.robot.q, sc.goal, zones, workspace, c, world.t(), 0.0);
      plan.id = ++plan_count;
      plans.push_back(plan);
      plan_t0 = world.t();
      log("replan", {{"plan_id", plan.id},
                     {"reason", "initial"},
                     {"length", r6(plan.length())},
                     {"horizon", r6(plan.horizon())},
                     {"escape", plan.escape}});
    }
  }

  // -- wiring ---------------------------------------------------------------

  void wire() {
    Bus& bus = self.bus_;
    const std::size_t depth = 4096;
    // caption node
    subs.push_back(bus.subscribe(topics::kCameraImage, depth, [this](const Bus::Message& m) { caption_node(m); }));
    // heatmap node
    subs.push_back(bus.subscribe(topics::kCameraImage, depth, [this](const Bus::Message& m) { heatmap_node(m); }));
    // llm node
    subs.push_back(bus.subscribe(topics::kCaption, depth, [this](const Bus::Message& m) { llm_on_caption(m); }));
    subs.push_back(bus.subscribe(topics::kHeatmapSummary, depth, [this](const Bus::Message& m) { llm_on_heatmap(m); }));
    // control loop
    subs.push_back(bus.subscribe(topics::kCaption, depth, [this](const Bus::Message& m) { nav_on_caption(m); }));
    subs.push_back(bus.subscribe(topics::kHeatmapSummary, depth, [this](const Bus::Message& m) { nav_on_heatmap(m); }));
    subs.push_back(bus.subscribe(topics::kExplanation, depth, [this](const Bus::Message& m) { nav_on_explanation(m); }));
  }

  void schedule_release(Bus::Handle& h, Payload p, double stamp) {
    pending.push_back({stamp, ++release_order, &h, std::move(p)});
  }

  void release_due() {
    for (;;) {
      auto due = std::min_element(pending.begin(), pending.end(), [](const Release& a, const Release& b) {
        return a.stamp != b.stamp ? a.stamp < b.stamp : a.order < b.order;
      });
      if (due == pending.end() || due->stamp > world.t() + 1e-9) return;
      Release r = std::move(*due);
      pending.erase(due);
      self.bus_.publish(*r.handle, std::move(r.payload), r.stamp);
      self.bus_.spin_some();
    }
  }

  // -- pipeline nodes ---------------------------------------------------------

  template <class F>
  static double wall_seconds(F&& f) {
    const auto start = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }

  void pipeline_error(std::uint64_t frame_seq, std::string_view stage, const std::exception& e) {
    log("error", {{"seq", frame_seq}, {"stage", stage}, {"message", e.what()}});
    captures.erase(frame_seq);
  }

  void caption_node(const Bus::Message& m) {
    const Frame& frame = std::get<Frame>(*m.payload);
    const double start = std::max(m.stamp, caption_free);
    Caption cap;
    try {
      const double wall = wall_seconds([&] { cap = caption(frame, opt.caption_backend); });
      const double lat =
          opt.caption_backend.kind == BackendKind::mock ? profile.draw(Stage::caption, latency_rng) : wall;
      cap.latency_s = lat;
      cap.stamp = start + lat;
      cap.source_seq = frame.seq;
      caption_free = cap.stamp;
      if (auto it = captures.find(frame.seq); it != captures.end()) it->second.record.t_caption_s = lat;
      schedule_release(h_caption, cap, cap.stamp);
    } catch (const Error& e) {
      pipeline_error(frame.seq, "caption", e);
    }
  }

  void heatmap_node(const Bus::Message& m) {
    const auto frame = std::make_shared<const Frame>(std::get<Frame>(*m.payload));
    const double start = std::max(m.stamp, heatmap_free);
    HeatmapMsg msg;
    msg.heatmap = grad_cam(cnn, *frame);
    const double lat = profile.draw(Stage::heatmap, latency_rng);
    msg.heatmap.stamp = start + lat;
    msg.heatmap.source_seq = frame->seq;
    msg.frame_seq = frame->seq;
    msg.frame = frame;
    heatmap_free = msg.heatmap.stamp;
    if (auto it = captures.find(frame->seq); it != captures.end()) {
      it->second.record.t_heatmap_s = lat;
      it->second.heatmap = msg.heatmap;
    }
    schedule_release(h_heatmap, std::move(msg), start + lat);
  }

  void llm_on_caption(const Bus::Message& m) {
    const Caption& cap = std::get<Caption>(*m.payload);
    if (auto pair = pairer.add_caption(cap, m.seq, m.stamp)) run_llm(*pair, m.stamp);
  }

  void llm_on_heatmap(const Bus::Message& m) {
    const HeatmapMsg& h = std::get<HeatmapMsg>(*m.payload);
    if (auto pair = pairer.add_summary(h.frame_seq, m.seq, h.heatmap.summary.text, m.stamp)) run_llm(*pair, m.stamp);
  }

  void run_llm(const Pairer::Pair& pair, double ready) {
    const std::uint64_t frame_seq = pair.caption.source_seq;
    const double start = std::max(ready, llm_free);
    try {
      const std::string prompt = build_prompt(pair.caption.text, pair.summary);
      Explanation e = xnav::explain(prompt, opt.llm_backend, phrase_rng);
      if (opt.llm_backend.kind == BackendKind::mock) {
        const auto [net, proc] = profile.draw_llm(latency_rng);
        e.latency_network_s = net;
        e.latency_processing_s = proc;
        e.latency_s = net + proc;
      }
      e.seq = frame_seq;
      e.caption_seq = pair.caption_seq;
      e.heatmap_seq = pair.heatmap_seq;
      e.stamp = start + e.latency_s;
      llm_free = e.stamp;
      if (auto it = captures.find(frame_seq); it != captures.end())
        set_llm(it->second.record, e.latency_network_s, e.latency_processing_s);
      schedule_release(h_explanation, std::move(e), start + e.latency_s);
    } catch (const Error& e) {
      pipeline_error(frame_seq, "llm", e);
    }
  }

  // -- control-loop subscribers ---------------------------------------------

  void nav_on_caption(const Bus::Message& m) {
    const Caption& cap = std::get<Caption>(*m.payload);
    auto it = captures.find(cap.source_seq);
    const bool predicted = eval::detect_conflict_from_caption(cap.text, rules);
    std::vector<int> newly;
    if (it != captures.end()) {
      labels.push_back({"frame_" + seq6(cap.source_seq), predicted, it->second.truth});
      // The VLM node reports the people it saw; the planner treats them as
      // known from now on.
      for (const Annotation& a : it->second.frame->annotations) {
        if (a.kind != Annotation::Kind::human) continue;
        const std::size_t idx = human_index(a.id);
        if (idx < known.size() && !known[idx]) {
          known[idx] = true;
          newly.push_back(a.id);
        }
      }
    }
    log("caption", {{"seq", cap.source_seq},
                    {"text", cap.text},
                    {"backend", cap.backend_id},
                    {"latency_s", r6(cap.latency_s)},
                    {"conflict_predicted", predicted},
                    {"detected_ids", newly}});
  }

  void nav_on_heatmap(const Bus::Message& m) {
    const HeatmapMsg& h = std::get<HeatmapMsg>(*m.payload);
    log("heatmap", {{"seq", h.frame_seq},
                    {"summary", h.heatmap.summary.text},
                    {"class", h.heatmap.summary.class_name},
                    {"focus_percentage", r6(h.heatmap.summary.focus_percentage)}});
  }

  void nav_on_explanation(const Bus::Message& m) {
    const Explanation& e = std::get<Explanation>(*m.payload);
    ++explanations;
    if (explain) {
      epsilon = std::min(1.0, epsilon + delta_eps);
      self.bus_.publish(h_epsilon, EpsilonMsg{reported_epsilon(), true}, world.t());
    }
    auto it = captures.find(e.seq);
    double total_s = e.latency_s;
    if (it != captures.end()) {
      LatencyRecord& rec = it->second.record;
      rec.trigger = opt.trigger;
      rec.seq = e.seq;
      rec.run_id = self.run_id_;
      total_s = total(rec);
      latency.push_back(rec);
      if (self.artifact_dir_ && it->second.heatmap)
        emit(e, *it->second.heatmap, *it->second.frame, *self.artifact_dir_ / self.run_id_);
    }
    log("explanation", {{"seq", e.seq},
                        {"text", e.text},
                        {"backend", e.backend_id},
                        {"latency_s", r6(total_s)},
                        {"late", total_s > opt.t_max},
                        {"epsilon", r6(reported_epsilon())}});
    if (it != captures.end()) captures.erase(it);
  }

  // -- helpers ---------------------------------------------------------------

  static std::string seq6(std::uint64_t s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06llu", static_cast<unsigned long long>(s));
    return buf;
  }

  std::size_t human_index(int id) const {
    for (std::size_t i = 0; i < world.humans.size(); ++i)
      if (world.humans[i].id == id) return i;
    return world.humans.size();
  }

  double reported_epsilon() const { return explain ? std::max(epsilon, 0.5 * delta_eps) : 0.0; }

  void log(std::string_view kind, ordered_json payload) {
    ordered_json e;
    e["tick"] = world.tick;
    e["stamp"] = r6(world.t());
    e["kind"] = kind;
    e["payload"] = std::move(payload);
    events.push_back(e.dump());
  }

  std::vector<HumanConfig> known_humans() const {
    std::vector<HumanConfig> out;
    for (std::size_t i = 0; i < world.humans.size(); ++i)
      if (known[i]) out.push_back(world.humans[i]);
    return out;
  }

  std::vector<sim::SocialZone> known_zones() const {
    const auto h = known_humans();
    return sim::build_social_zones(h, c.d_social, c.group_radius);
  }

  std::vector<sim::SocialZone> all_zones() const {
    return sim::build_social_zones(world.humans, c.d_social, c.group_radius);
  }

  void sense() {
    const Vec2 p = world.robot.q.position();
    for (std::size_t i = 0; i < world.humans.size(); ++i) {
      if (known[i]) continue;
      if (distance(p, world.humans[i].pose.position()) <= c.sense_range) {
        known[i] = true;
        log("sense", {{"id", world.humans[i].id}, {"distance", r6(distance(p, world.humans[i].pose.position()))}});
      }
    }
  }

  std::size_t plan_index() const {
    if (plan.samples.empty()) return 0;
    const double k = std::round((world.t() - plan_t0) / dt);
    return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(plan.samples.size() - 1)));
  }

  /// Straight-ahead projection of the current velocity (manual mode).
  sim::Plan projection() const {
    sim::Plan p;
    const Vec2 v = rotate({world.robot.v.vx, world.robot.v.vy}, world.robot.q.psi);
    for (int i = 0; i <= 30; ++i) {
      sim::PlanSample s;
      s.t = world.t() + i * dt;
      const Vec2 q = world.robot.q.position() + v * (i * dt);
      s.pose = {q.x, q.y, world.robot.q.psi};
      s.velocity = v;
      s.s = v.norm() * i * dt;
      p.samples.push_back(s);
    }
    return p;
  }

  bool robot_inside(const std::vector<sim::SocialZone>& zones) const {
    return sim::zone_clearance(world.robot.q.position(), zones) < 0.0;
  }

  // -- capture ---------------------------------------------------------------

  void capture(std::string_view reason) {
    if (!explain) return;
    auto frame = render_view(world, world.robot.q);
    frame.seq = ++capture_count;
    frame.stamp = world.t();
    frame.setting = sc.setting;
    Capture cap;
    cap.tick = world.tick;
    cap.t = world.t();
    const double t_cam = profile.draw(Stage::camera, latency_rng);
    cap.record.t_camera_s = t_cam;
    const auto zones = all_zones();
    if (opt.mode == Mode::autonomous && !plan.samples.empty() && control != Control::finished)
      cap.truth = sim::conflict_margin(plan, zones, plan_index()) <= 0.0;
    else
      cap.truth = sim::conflict_margin(projection(), zones) <= 0.0;
    std::vector<int> in_view;
    for (const Annotation& a : frame.annotations)
      if (a.kind == Annotation::Kind::human) in_view.push_back(a.id);
    log("capture", {{"seq", frame.seq}, {"reason", reason}, {"humans_in_view", in_view}, {"conflict_truth", cap.truth}});
    cap.frame = std::make_shared<const Frame>(frame);
    const double release = std::max(world.t(), camera_free) + t_cam;
    camera_free = release;
    captures[frame.seq] = std::move(cap);
    schedule_release(h_camera, std::move(frame), release);
    last_capture = world.t();
  }

  // -- control ---------------------------------------------------------------

  void replan(std::string_view reason, double v0) {
    const auto zones = known_zones();
    try {
      sim::Plan next = sim::plan_path(world.robot.q, sc.goal, zones, workspace, c, world.t(), v0);
      next.id = ++plan_count;
      plan = std::move(next);
      plans.push_back(plan);
      plan_t0 = world.t();
      control = Control::follow;
      log("replan", {{"plan_id", plan.id},
                     {"reason", reason},
                     {"length", r6(plan.length())},
                     {"horizon", r6(plan.horizon())},
                     {"escape", plan.escape}});
    } catch (const sim::NoPathError& e) {
      control = Control::hold;
      next_retry = world.t() + 1.0;
      log("no_path", {{"reason", reason}, {"message", e.what()}});
    }
  }

  void check_conflicts() {
    const auto zones = known_zones();
    if (opt.mode == Mode::manual) {
      const double h = sim::conflict_margin(projection(), zones);
      const bool now_conflict = h <= 0.0;
      if (now_conflict && !in_conflict) on_conflict(h, zones, projection(), 0);
      in_conflict = now_conflict;
      return;
    }
    if (control != Control::follow || plan.samples.empty()) return;
    if (plan.escape && robot_inside(zones)) return;
    const std::size_t k = plan_index();
    const double h = sim::conflict_margin(plan, zones, k);
    if (h > 0.0) return;
    on_conflict(h, zones, plan, k);
    // Distance along the plan to the first sample inside a zone.
    double to_zone = 0.0;
    for (std::size_t i = k; i < plan.samples.size(); ++i) {
      if (sim::zone_clearance(plan.samples[i].pose.position(), zones) <= 0.0) {
        to_zone = plan.samples[i].s - plan.samples[k].s;
        break;
      }
    }
    const double v = world.robot.v.speed();
    const double needed = v * v / (2.0 * c.a_nominal) + kBrakeMargin;
    if (v > kStopSpeed && to_zone < needed) {
      control = Control::brake;
      log("brake", {{"plan_id", plan.id}, {"distance_to_zone", r6(to_zone)}, {"speed", r6(v)}});
    } else {
      replan("conflict", v);
    }
  }

  void on_conflict(double h, const std::vector<sim::SocialZone>& zones, const sim::Plan& p, std::size_t first) {
    ++conflicts;
    std::vector<sim::SocialZone> hit;
    for (const auto& z : zones) {
      const std::vector<sim::SocialZone> one{z};
      if (sim::conflict_margin(p, one, first) <= 0.0) hit.push_back(z);
    }
    ordered_json members = ordered_json::array();
    for (const auto& z : hit) members.push_back(z.member_ids);
    log("conflict", {{"plan_id", plan.id}, {"margin", r6(h)}, {"zones", members}});
    self.bus_.publish(h_conflict, ConflictMsg{h, plan.id, hit}, world.t());
    if (opt.trigger == Trigger::conflict_event && world.t() - last_capture >= 1.0) capture("conflict");
  }

  VelocityCommand heading_command(Vec2 v_world) const {
    const double speed = v_world.norm();
    double psidot = 0.0;
    if (speed > kStopSpeed) {
      const double err = normalize_angle(std::atan2(v_world.y, v_world.x) - world.robot.q.psi);
      psidot = std::clamp(err / (5.0 * dt), -kMaxTurnRate, kMaxTurnRate);
    }
    const Vec2 body = rotate(v_world, -world.robot.q.psi);
    return {body.x, body.y, psidot};
  }

  VelocityCommand autonomous_command() {
    const Vec2 v_cur = rotate({world.robot.v.vx, world.robot.v.vy}, world.robot.q.psi);
    const double speed = v_cur.norm();
    switch (control) {
      case Control::brake: {
        const double dv = c.a_brake * dt;
        const Vec2 v = speed <= dv ? Vec2{} : v_cur * ((speed - dv) / speed);
        return {rotate(v, -world.robot.q.psi).x, rotate(v, -world.robot.q.psi).y, 0.0};
      }
      case Control::hold: {
        const double dv = c.a_nominal * dt;
        const Vec2 v = speed <= dv ? Vec2{} : v_cur * ((speed - dv) / speed);
        return {rotate(v, -world.robot.q.psi).x, rotate(v, -world.robot.q.psi).y, 0.0};
      }
      case Control::finished:
        return {};
      case Control::follow:
        break;
    }
    const std::size_t k = plan_index();
    const std::size_t next = std::min(k + 1, plan.samples.size() - 1);
    const Vec2 target = plan.samples[next].pose.position();
    return heading_command((target - world.robot.q.position()) * (1.0 / dt));
  }

  void after_step() {
    if (opt.mode == Mode::manual) {
      if (distance(world.robot.q.position(), sc.goal.position()) <= kManualGoalTolerance) finish_goal();
      return;
    }
    const double speed = world.robot.v.speed();
    if (control == Control::brake && speed < 1e-9) {
      log("stop", {{"reason", "brake"}});
      replan("after_brake", 0.0);
    } else if (control == Control::hold && world.t() + 1e-9 >= next_retry) {
      replan("retry", speed);
    }
    if (control == Control::follow && plan_index() + 1 >= plan.samples.size() &&
        distance(world.robot.q.position(), sc.goal.position()) <= c.goal_tolerance)
      finish_goal();
  }

  void finish_goal() {
    goal_reached = true;
    control = Control::finished;
    finished = true;
    log("goal", {{"x", r4(world.robot.q.x)}, {"y", r4(world.robot.q.y)}});
  }

  void apply(const Inbound& in) {
    log("command", inbound_to_json(in));
    if (const auto* cmd = std::get_if<CmdIn>(&in)) {
      manual_cmd = sim::clamp_command(cmd->cmd, c.v_max);
      if (cmd->cmd.speed() > c.v_max + 1e-12) log("warning", {{"message", "command clamped to v_max"}});
    } else if (const auto* t = std::get_if<ToggleIn>(&in)) {
      explain = t->enabled;
      self.bus_.publish(h_epsilon, EpsilonMsg{reported_epsilon(), explain}, world.t());
    } else {
      capture("manual");
    }
  }

  void publish_state() {
    StateMsg s{world.robot, world.humans, plan.path, plan.id, explain};
    self.bus_.publish(h_state, std::move(s), world.t());
    ordered_json snap;
    snap["tick"] = world.tick;
    snap["stamp"] = r6(world.t());
    snap["robot"] = {{"x", r4(world.robot.q.x)},
                     {"y", r4(world.robot.q.y)},
                     {"psi", r4(world.robot.q.psi)},
                     {"speed", r4(world.robot.v.speed())}};
    snap["plan_id"] = plan.id;
    snap["explain"] = explain;
    snap["epsilon"] = r6(reported_epsilon());
    snap["done"] = finished;
    std::lock_guard lock(snap_mu);
    snapshot = std::move(snap);
  }

  void tick() {
    if (finished) return;
    std::vector<Inbound> inputs;
    {
      std::lock_guard lock(in_mu);
      while (!scheduled.empty() && scheduled.front().tick <= world.tick) {
        inputs.push_back(scheduled.front().input);
        scheduled.pop_front();
      }
      for (auto& in : submitted) inputs.push_back(std::move(in));
      submitted.clear();
    }
    for (const auto& in : inputs) apply(in);

    release_due();
    sense();
    if (opt.trigger == Trigger::fixed_interval && world.t() + 1e-9 >= next_capture) {
      capture("interval");
      next_capture += interval;
    }
    check_conflicts();

    const VelocityCommand cmd =
        opt.mode == Mode::manual ? manual_cmd : sim::clamp_command(autonomous_command(), c.v_max);
    self.bus_.publish(h_cmd, cmd, world.t());
    commands.emplace_back(world.t(), cmd);
    world = sim::step(world, cmd, dt);
    history.push_back(world.robot);
    human_history.push_back(world.humans);
    log("state", {{"x", r4(world.robot.q.x)},
                  {"y", r4(world.robot.q.y)},
                  {"psi", r4(world.robot.q.psi)},
                  {"speed", r4(world.robot.v.speed())},
                  {"plan_id", plan.id}});
    after_step();
    publish_state();
    self.bus_.spin_some();
    if (!finished && world.t() + 1e-9 >= c.max_time) {
      finished = true;
      log("timeout", {{"max_time", c.max_time}});
    }
    if (!finished && stop_when_idle && opt.mode == Mode::manual && world.robot.v.speed() < 1e-9) {
      std::lock_guard lock(in_mu);
      if (scheduled.empty() && submitted.empty()) {
        finished = true;
        log("idle", {});
      }
    }
  }

  RunResult finish() {
    RunResult r;
    r.run_id = self.run_id_;
    sim::RunMetrics& m = r.metrics;
    m.scenario_id = sc.id;
    m.total_trajectory_m = sim::trajectory_length(history);
    m.total_time_s = r6(world.t());
    m.conflicts_detected = conflicts;
    std::vector<double> speeds;
    for (const auto& s : history) speeds.push_back(s.v.speed());
    m.sudden_stops = sim::detect_sudden_stop(speeds, dt, opt.decel_threshold, opt.stop_window);
    m.goal_reached = goal_reached;
    m.epsilon = reported_epsilon();
    if (!pending.empty()) log("pipeline_drained", {{"in_flight", pending.size()}});
    ordered_json mj = sim::metrics_to_json(m);
    log("metrics", mj);
    self.bus_.publish(h_metrics, m, world.t());
    self.bus_.spin_some();
    r.events = std::move(events);
    r.latency = std::move(latency);
    r.labels = std::move(labels);
    r.commands = std::move(commands);
    r.history = std::move(history);
    r.human_history = std::move(human_history);
    r.plans = std::move(plans);
    r.explanations = explanations;
    r.explain_at_end = explain;
    return r;
  }

  static constexpr double kStopSpeed = 0.05;
  static constexpr double kBrakeMargin = 0.3;
  static constexpr double kMaxTurnRate = 1.5;
  static constexpr double kManualGoalTolerance = 0.3;

  Runner& self;
  const Scenario& sc;
  const ScenarioConstants& c;
  RunOptions& opt;
  std::uint64_t seed;
  sim::WorldState world;
  LatencyProfile profile;
  Rng latency_rng;
  Rng phrase_rng;
  TinyCnn cnn;
  std::vector<eval::KeywordRule> rules;
  Pairer pairer;
  Bus::Handle h_camera, h_caption, h_heatmap, h_explanation, h_conflict, h_cmd, h_state, h_metrics, h_epsilon;
  std::vector<std::shared_ptr<Bus::Subscription>> subs;

  double dt{0.1};
  bool explain{false};
  double interval{5.0};
  double delta_eps{0.0};
  double epsilon{0.0};
  sim::Workspace workspace;
  std::vector<bool> known;

  std::vector<Release> pending;
  std::uint64_t release_order{0};
  double camera_free{0.0}, caption_free{0.0}, heatmap_free{0.0}, llm_free{0.0};
  std::map<std::uint64_t, Capture> captures;
  std::uint64_t capture_count{0};
  double next_capture{0.0};
  double last_capture{-1e300};

  sim::Plan plan;
  double plan_t0{0.0};
  int plan_count{0};
  Control control{Control::follow};
  double next_retry{0.0};
  bool in_conflict{false};
  VelocityCommand manual_cmd;
  bool goal_reached{false};
  bool finished{false};
  bool stop_when_idle{false};
  int conflicts{0};
  std::size_t explanations{0};

  std::vector<std::string> events;
  std::vector<LatencyRecord> latency;
  std::vector<eval::LabelRow> labels;
  std::vector<std::pair<double, VelocityCommand>> commands;
  std::vector<RobotState> history;
  std::vector<std::vector<HumanConfig>> human_history;
  std::vector<sim::Plan> plans;

  std::mutex in_mu;
  std::deque<ScheduledInbound> scheduled;
  std::vector<Inbound> submitted;
  mutable std::mutex snap_mu;
  ordered_json snapshot;
};

Runner::Runner(const Scenario& scenario, RunOptions options)
    : scenario_(scenario), options_(std::move(options)), run_id_(make_run_id(scenario_, options_)) {
  validate(scenario_);
  impl_ = std::make_unique<Impl>(*this);
  impl_->publish_state();
}

Runner::~Runner() { bus_.shutdown(); }

void Runner::submit(Inbound in) {
  std::lock_guard lock(impl_->in_mu);
  impl_->submitted.push_back(std::move(in));
}

void Runner::schedule(ScheduledInbound in) {
  std::lock_guard lock(impl_->in_mu);
  auto& q = impl_->scheduled;
  auto pos = std::upper_bound(q.begin(), q.end(), in.tick,
                              [](std::int64_t t, const ScheduledInbound& s) { return t < s.tick; });
  q.insert(pos, std::move(in));
}

void Runner::tick() { impl_->tick(); }
bool Runner::done() const { return impl_->finished; }
double Runner::now() const { return impl_->world.t(); }
std::int64_t Runner::tick_index() const { return impl_->world.tick; }

nlohmann::json Runner::snapshot() const {
  std::lock_guard lock(impl_->snap_mu);
  return impl_->snapshot;
}

void Runner::set_stop_when_idle(bool v) { impl_->stop_when_idle = v; }

RunResult Runner::finish() { return impl_->finish(); }

RunResult run_scenario(const Scenario& scenario, const RunOptions& options, const std::vector<ScheduledInbound>& inputs,
                       const std::optional<std::filesystem::path>& out_dir) {
  Runner runner(scenario, options);
  if (out_dir) runner.set_artifact_dir(*out_dir);
  for (const auto& in : inputs) runner.schedule(in);
  runner.set_stop_when_idle(options.mode == Mode::manual);
  while (!runner.done()) runner.tick();
  RunResult result = runner.finish();
  if (out_dir) write_run_dir(*out_dir, scenario, options, result);
  return result;
}

}  // namespace xnav
