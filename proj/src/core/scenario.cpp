#include "xnav/core/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xnav/core/error.hpp"

namespace xnav {

using nlohmann::json;

HumanConfig human_at(const HumanSpec& spec, double t) {
  HumanConfig h;
  h.id = spec.id;
  h.activity = spec.activity;
  h.group_id = spec.group_id;
  h.pose.psi = spec.psi;
  const auto& tr = spec.track;
  if (tr.empty()) return h;
  if (t <= tr.front().t || tr.size() == 1) {
    h.pose.x = tr.front().x;
    h.pose.y = tr.front().y;
    return h;
  }
  if (t >= tr.back().t) {
    h.pose.x = tr.back().x;
    h.pose.y = tr.back().y;
    return h;
  }
  const auto it = std::upper_bound(tr.begin(), tr.end(), t,
                                   [](double v, const Waypoint& w) { return v < w.t; });
  const Waypoint& b = *it;
  const Waypoint& a = *(it - 1);
  const double span = b.t - a.t;
  const double u = (t - a.t) / span;
  h.pose.x = a.x + u * (b.x - a.x);
  h.pose.y = a.y + u * (b.y - a.y);
  h.velocity = {(b.x - a.x) / span, (b.y - a.y) / span};
  if (h.velocity.norm() > 0.0) h.pose.psi = std::atan2(h.velocity.y, h.velocity.x);
  return h;
}

namespace {

[[noreturn]] void invalid(std::vector<std::string> fields, const std::string& msg) {
  std::string what = msg + " [";
  for (std::size_t i = 0; i < fields.size(); ++i) what += (i ? ", " : "") + fields[i];
  what += "]";
  throw ValidationError(std::move(fields), what);
}

bool inside_any(const std::vector<Rect>& rects, Vec2 p) {
  return std::any_of(rects.begin(), rects.end(), [&](const Rect& r) { return r.contains(p); });
}

void validate_pose_placement(const Scenario& s, const Pose& p, const std::string& field) {
  if (!s.bounds.contains(p.position())) invalid({field}, field + " lies outside bounds");
  if (inside_any(s.obstacles, p.position())) invalid({field}, field + " lies inside an obstacle");
}

}  // namespace

void validate(const Scenario& s) {
  const auto& c = s.constants;
  if (s.version != kScenarioVersion) invalid({"version"}, "unsupported scenario version");
  if (!(c.d_safe > 0.0)) invalid({"constants.d_safe"}, "d_safe must be positive");
  if (c.d_social < c.d_safe)
    invalid({"constants.d_safe", "constants.d_social"}, "d_social must be >= d_safe");
  if (!(c.dt > 0.0)) invalid({"constants.dt"}, "dt must be positive");
  if (!(c.v_max > 0.0)) invalid({"constants.v_max"}, "v_max must be positive");
  if (!(c.alpha_social > 0.0)) invalid({"constants.alpha_social"}, "alpha_social must be positive");
  if (!(c.a_nominal > 0.0)) invalid({"constants.a_nominal"}, "a_nominal must be positive");
  if (!(c.a_brake >= c.a_nominal)) invalid({"constants.a_brake"}, "a_brake must be >= a_nominal");
  if (!(c.group_radius > 0.0)) invalid({"constants.group_radius"}, "group_radius must be positive");
  if (!(c.robot_radius >= 0.0)) invalid({"constants.robot_radius"}, "robot_radius must be >= 0");
  if (!(c.sense_range > c.d_social))
    invalid({"constants.sense_range", "constants.d_social"}, "sense_range must exceed d_social");
  if (!(c.max_time > 0.0)) invalid({"constants.max_time"}, "max_time must be positive");
  if (!(c.goal_tolerance > 0.0)) invalid({"constants.goal_tolerance"}, "goal_tolerance must be positive");
  if (!(s.capture_interval > 0.0)) invalid({"capture_interval"}, "capture_interval must be positive");
  if (!(s.human_jitter >= 0.0)) invalid({"human_jitter"}, "human_jitter must be >= 0");
  if (s.expected_explanations < 1) invalid({"expected_explanations"}, "expected_explanations must be >= 1");
  if (!(s.bounds.xmax > s.bounds.xmin && s.bounds.ymax > s.bounds.ymin))
    invalid({"bounds"}, "bounds must have positive extent");
  for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
    const Rect& r = s.obstacles[i];
    if (!(r.xmax > r.xmin && r.ymax > r.ymin))
      invalid({"obstacles[" + std::to_string(i) + "]"}, "obstacle must have positive extent");
  }
  validate_pose_placement(s, s.robot_start, "robot");
  validate_pose_placement(s, s.goal, "goal");

  std::set<int> ids;
  std::map<int, int> group_sizes;
  for (std::size_t i = 0; i < s.humans.size(); ++i) {
    const HumanSpec& h = s.humans[i];
    const std::string path = "humans[" + std::to_string(i) + "]";
    if (!ids.insert(h.id).second) invalid({path + ".id"}, "duplicate human id");
    if (h.track.empty()) invalid({path + ".track"}, "track needs at least one waypoint");
    for (std::size_t k = 1; k < h.track.size(); ++k)
      if (!(h.track[k].t > h.track[k - 1].t))
        invalid({path + ".track[" + std::to_string(k) + "].t"}, "waypoint times must increase");
    if (h.activity == Activity::conversing) {
      if (!h.group_id) invalid({path + ".group_id"}, "conversing human needs a group_id");
      ++group_sizes[*h.group_id];
    }
  }
  for (const auto& [gid, n] : group_sizes)
    if (n < 2) invalid({"humans"}, "group " + std::to_string(gid) + " has fewer than 2 conversing members");
}

// ---------------------------------------------------------------------------
// JSON

namespace {

const json& require(const json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ParseError("missing field '" + path + key + "'");
  return j.at(key);
}

double number(const json& j, const char* key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_number()) throw ParseError("field '" + path + key + "' must be a number");
  return v.get<double>();
}

double number_or(const json& j, const char* key, double fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  return number(j, key, path);
}

Rect rect_from(const json& j, const std::string& path) {
  return {number(j, "xmin", path), number(j, "ymin", path), number(j, "xmax", path),
          number(j, "ymax", path)};
}

json rect_to(const Rect& r) {
  return {{"xmin", r.xmin}, {"ymin", r.ymin}, {"xmax", r.xmax}, {"ymax", r.ymax}};
}

Pose pose_from(const json& j, const std::string& path) {
  return {number(j, "x", path), number(j, "y", path), number_or(j, "psi", 0.0, path)};
}

json pose_to(const Pose& p) { return {{"x", p.x}, {"y", p.y}, {"psi", p.psi}}; }

}  // namespace

Scenario scenario_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("scenario must be a JSON object");
  Scenario s;
  const json& ver = require(j, "version", "");
  if (!ver.is_number_integer()) throw ParseError("field 'version' must be an integer");
  s.version = ver.get<int>();
  if (j.contains("id")) s.id = j.at("id").get<std::string>();
  if (j.contains("setting")) s.setting = j.at("setting").get<std::string>();
  s.bounds = rect_from(require(j, "bounds", ""), "bounds.");
  if (j.contains("obstacles")) {
    const json& obs = j.at("obstacles");
    if (!obs.is_array()) throw ParseError("field 'obstacles' must be an array");
    for (std::size_t i = 0; i < obs.size(); ++i)
      s.obstacles.push_back(rect_from(obs[i], "obstacles[" + std::to_string(i) + "]."));
  }
  s.robot_start = pose_from(require(j, "robot", ""), "robot.");
  s.goal = pose_from(require(j, "goal", ""), "goal.");
  if (j.contains("humans")) {
    const json& hs = j.at("humans");
    if (!hs.is_array()) throw ParseError("field 'humans' must be an array");
    for (std::size_t i = 0; i < hs.size(); ++i) {
      const std::string p = "humans[" + std::to_string(i) + "].";
      const json& hj = hs[i];
      HumanSpec h;
      h.id = require(hj, "id", p).get<int>();
      h.activity = activity_from_string(require(hj, "activity", p).get<std::string>());
      if (hj.contains("group_id") && !hj.at("group_id").is_null()) h.group_id = hj.at("group_id").get<int>();
      h.psi = number_or(hj, "psi", 0.0, p);
      const json& tr = require(hj, "track", p);
      if (!tr.is_array()) throw ParseError("field '" + p + "track' must be an array");
      for (std::size_t k = 0; k < tr.size(); ++k) {
        const std::string wp = p + "track[" + std::to_string(k) + "].";
        h.track.push_back({number_or(tr[k], "t", 0.0, wp), number(tr[k], "x", wp), number(tr[k], "y", wp)});
      }
      s.humans.push_back(std::move(h));
    }
  }
  if (j.contains("constants")) {
    const json& c = j.at("constants");
    const std::string p = "constants.";
    auto& k = s.constants;
    k.d_safe = number_or(c, "d_safe", k.d_safe, p);
    k.d_social = number_or(c, "d_social", k.d_social, p);
    k.alpha_social = number_or(c, "alpha_social", k.alpha_social, p);
    k.v_max = number_or(c, "v_max", k.v_max, p);
    k.dt = number_or(c, "dt", k.dt, p);
    k.group_radius = number_or(c, "group_radius", k.group_radius, p);
    k.robot_radius = number_or(c, "robot_radius", k.robot_radius, p);
    k.a_nominal = number_or(c, "a_nominal", k.a_nominal, p);
    k.a_brake = number_or(c, "a_brake", k.a_brake, p);
    k.sense_range = number_or(c, "sense_range", k.sense_range, p);
    k.max_time = number_or(c, "max_time", k.max_time, p);
    k.goal_tolerance = number_or(c, "goal_tolerance", k.goal_tolerance, p);
  }
  if (j.contains("seed")) {
    const json& sd = j.at("seed");
    if (!sd.is_number_unsigned() && !(sd.is_number_integer() && sd.get<std::int64_t>() >= 0))
      throw ParseError("field 'seed' must be a non-negative integer");
    s.seed = sd.get<std::uint64_t>();
  }
  s.capture_interval = number_or(j, "capture_interval", s.capture_interval, "");
  s.human_jitter = number_or(j, "human_jitter", s.human_jitter, "");
  if (j.contains("expected_explanations")) s.expected_explanations = j.at("expected_explanations").get<int>();
  return s;
}

json scenario_to_json(const Scenario& s) {
  json j;
  j["version"] = s.version;
  j["id"] = s.id;
  j["setting"] = s.setting;
  j["bounds"] = rect_to(s.bounds);
  j["obstacles"] = json::array();
  for (const Rect& r : s.obstacles) j["obstacles"].push_back(rect_to(r));
  j["robot"] = pose_to(s.robot_start);
  j["goal"] = pose_to(s.goal);
  j["humans"] = json::array();
  for (const HumanSpec& h : s.humans) {
    json hj{{"id", h.id}, {"activity", to_string(h.activity)}, {"psi", h.psi}};
    hj["group_id"] = h.group_id ? json(*h.group_id) : json(nullptr);
    hj["track"] = json::array();
    for (const Waypoint& w : h.track) hj["track"].push_back({{"t", w.t}, {"x", w.x}, {"y", w.y}});
    j["humans"].push_back(std::move(hj));
  }
  const auto& k = s.constants;
  j["constants"] = {{"d_safe", k.d_safe},         {"d_social", k.d_social},
                    {"alpha_social", k.alpha_social}, {"v_max", k.v_max},
                    {"dt", k.dt},                 {"group_radius", k.group_radius},
                    {"robot_radius", k.robot_radius}, {"a_nominal", k.a_nominal},
                    {"a_brake", k.a_brake},       {"sense_range", k.sense_range},
                    {"max_time", k.max_time},     {"goal_tolerance", k.goal_tolerance}};
  j["seed"] = s.seed;
  j["capture_interval"] = s.capture_interval;
  j["human_jitter"] = s.human_jitter;
  j["expected_explanations"] = s.expected_explanations;
  return j;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("malformed scenario " + path.string() + ": " + e.what());
  }
  Scenario s;
  try {
    s = scenario_from_json(j);
  } catch (const json::exception& e) {
    throw ParseError("malformed scenario " + path.string() + ": " + e.what());
  }
  validate(s);
  return s;
}

void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write scenario file " + path.string());
  out << scenario_to_json(s).dump(2) << '\n';
}

}  // namespace xnav
