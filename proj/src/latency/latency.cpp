#include "xnav/latency/latency.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace xnav {

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::camera: return "camera";
    case Stage::caption: return "caption";
    case Stage::heatmap: return "heatmap";
    case Stage::llm: break;
  }
  return "llm";
}

std::string_view to_string(Trigger t) {
  switch (t) {
    case Trigger::fixed_interval: return "fixed_interval";
    case Trigger::manual: return "manual";
    case Trigger::conflict_event: break;
  }
  return "conflict_event";
}

Trigger trigger_from_string(std::string_view s) {
  if (s == "fixed_interval" || s == "interval") return Trigger::fixed_interval;
  if (s == "manual") return Trigger::manual;
  if (s == "conflict_event" || s == "conflict") return Trigger::conflict_event;
  throw ParseError("unknown trigger '" + std::string(s) + "'");
}

std::optional<double>& LatencyRecord::field(Stage s) {
  switch (s) {
    case Stage::camera: return t_camera_s;
    case Stage::caption: return t_caption_s;
    case Stage::heatmap: return t_heatmap_s;
    case Stage::llm: break;
  }
  return t_llm_s;
}

double total(LatencyRecord& r) {
  double sum = 0.0;
  for (Stage s : kStages) {
    const auto& v = r.field(s);
    if (!v) {
      const std::string name = "t_" + std::string(to_string(s)) + "_s";
      throw ValidationError({name}, "latency record is missing " + name);
    }
    sum += *v;
  }
  r.total_s = sum;
  return sum;
}

void set_llm(LatencyRecord& r, double network_s, double processing_s) {
  r.t_llm_network_s = network_s;
  r.t_llm_processing_s = processing_s;
  r.t_llm_s = network_s + processing_s;
}

bool additive(const LatencyRecord& r, double tol) {
  if (!r.t_camera_s || !r.t_caption_s || !r.t_heatmap_s || !r.t_llm_s) return false;
  const double sum = *r.t_camera_s + *r.t_caption_s + *r.t_heatmap_s + *r.t_llm_s;
  return std::abs(r.total_s - sum) <= tol && std::abs(*r.t_llm_s - (r.t_llm_network_s + r.t_llm_processing_s)) <= tol;
}

namespace {
thread_local bool g_in_stage = false;
}

StageTimer::StageTimer(Stage s, Clock& clock, LatencyRecord* record)
    : stage_(s), clock_(clock), record_(record), start_(clock.now()) {
  if (g_in_stage) throw Error("nested stage timing (" + std::string(to_string(s)) + ")");
  g_in_stage = true;
}

StageTimer::~StageTimer() {
  if (!stopped_) g_in_stage = false;
}

double StageTimer::stop() {
  const double d = std::max(0.0, clock_.now() - start_);
  if (!stopped_) {
    stopped_ = true;
    g_in_stage = false;
    if (record_) record_->field(stage_) = d;
  }
  return d;
}

void LatencyConfig::validate() const {
  if (!(t_max_s > 0.0)) throw ValidationError({"t_max_s"}, "t_max must be positive");
  if (!(compute_factor > 0.0)) throw ValidationError({"compute_factor"}, "compute factor must be positive");
  for (Stage s : kStages) {
    auto it = stage_options.find(s);
    if (it == stage_options.end() || it->second.empty())
      throw ValidationError({"stage_options." + std::string(to_string(s))}, "every stage needs at least one option");
  }
}

InfeasibleBudget::InfeasibleBudget(double min_total, double t_max)
    : Error([&] {
        char buf[128];
        std::snprintf(buf, sizeof buf, "no configuration fits t_max=%.3f s; minimum achievable %.3f s", t_max,
                      min_total);
        return std::string(buf);
      }()),
      min_total_(min_total) {}

Selection select_config(const LatencyConfig& config) {
  config.validate();
  auto weight = [&](const StageOption& o) {
    auto it = config.lambda.find(o.quality_tag);
    return it == config.lambda.end() ? 0.0 : it->second;
  };
  Selection sel;
  // Objective and constraint are both sums over stages, so the optimum
  // takes each stage's best option independently.
  for (Stage s : kStages) {
    const auto& opts = config.stage_options.at(s);
    const StageOption* best = &opts.front();
    for (const StageOption& o : opts) {
      if (o.expected_latency_s != best->expected_latency_s) {
        if (o.expected_latency_s < best->expected_latency_s) best = &o;
        continue;
      }
      if (weight(o) != weight(*best)) {
        if (weight(o) > weight(*best)) best = &o;
        continue;
      }
      if (o.option_id < best->option_id) best = &o;
    }
    sel.chosen[s] = *best;
  }
  double raw = 0.0;
  for (Stage s : kStages) {
    raw += sel.chosen[s].expected_latency_s;
    sel.quality += weight(sel.chosen[s]);
  }
  sel.total_s = raw / config.compute_factor;
  if (sel.total_s > config.t_max_s) throw InfeasibleBudget(sel.total_s, config.t_max_s);
  return sel;
}

TriggerStats summarize_totals(std::span<const double> totals, double threshold_s) {
  if (totals.empty()) throw ValidationError({"records"}, "no latency records");
  std::vector<double> v(totals.begin(), totals.end());
  std::sort(v.begin(), v.end());
  TriggerStats st;
  st.count = v.size();
  st.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  st.min = v.front();
  st.max = v.back();
  const std::size_t rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size())));
  st.p95 = v[std::max<std::size_t>(rank, 1) - 1];
  st.fraction_above = static_cast<double>(std::count_if(v.begin(), v.end(), [&](double x) { return x > threshold_s; })) /
                      static_cast<double>(v.size());
  return st;
}

std::map<Trigger, TriggerStats> trigger_stats(std::span<const LatencyRecord> records, double threshold_s) {
  if (records.empty()) throw ValidationError({"records"}, "no latency records");
  std::map<Trigger, std::vector<double>> by;
  for (const LatencyRecord& r : records) by[r.trigger].push_back(r.total_s);
  std::map<Trigger, TriggerStats> out;
  for (const auto& [t, totals] : by) out[t] = summarize_totals(totals, threshold_s);
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("latency CSV: bad " + what + " '" + s + "'");
  }
}

}  // namespace

void write_latency_csv(std::ostream& out, std::span<const LatencyRecord> records) {
  out << kLatencyCsvHeader << '\n';
  for (const LatencyRecord& r : records) {
    out << r.run_id << ',' << r.seq << ',' << to_string(r.trigger) << ',' << fmt(r.t_camera_s.value_or(0)) << ','
        << fmt(r.t_caption_s.value_or(0)) << ',' << fmt(r.t_heatmap_s.value_or(0)) << ',' << fmt(r.t_llm_network_s)
        << ',' << fmt(r.t_llm_processing_s) << ',' << fmt(r.total_s) << '\n';
  }
}

std::vector<LatencyRecord> read_latency_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kLatencyCsvHeader) throw ParseError("latency CSV: bad header");
  std::vector<LatencyRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 9) throw ParseError("latency CSV: expected 9 fields in '" + line + "'");
    LatencyRecord r;
    r.run_id = f[0];
    r.seq = static_cast<std::uint64_t>(parse_double(f[1], "seq"));
    r.trigger = trigger_from_string(f[2]);
    r.t_camera_s = parse_double(f[3], "t_camera");
    r.t_caption_s = parse_double(f[4], "t_caption");
    r.t_heatmap_s = parse_double(f[5], "t_heatmap");
    set_llm(r, parse_double(f[6], "t_llm_network"), parse_double(f[7], "t_llm_processing"));
    r.total_s = parse_double(f[8], "total");
    out.push_back(r);
  }
  return out;
}

LatencyProfile LatencyProfile::desk() {
  LatencyProfile p;
  p.name = "desk";
  p.camera = {0.05, 0.2};
  p.caption = {0.5, 0.3};
  p.heatmap = {0.1, 0.2};
  p.llm_network = {0.2, 0.3};
  p.llm_processing = {0.6, 0.3};
  return p;
}

LatencyProfile LatencyProfile::hosted() {
  LatencyProfile p;
  p.name = "hosted";
  p.camera = {0.3, 0.5};
  p.caption = {7.0, 0.5};
  p.heatmap = {1.5, 0.5};
  p.llm_network = {2.5, 0.5};
  p.llm_processing = {6.5, 0.5};
  return p;
}

LatencyProfile LatencyProfile::by_name(std::string_view name) {
  if (name == "desk") return desk();
  if (name == "hosted") return hosted();
  throw ConfigError("unknown latency profile '" + std::string(name) + "'");
}

namespace {
double draw_lognormal(const LatencyProfile::Dist& d, Rng& rng) { return d.median * std::exp(d.sigma * rng.normal()); }
}  // namespace

double LatencyProfile::draw(Stage s, Rng& rng) const {
  switch (s) {
    case Stage::camera: return scale * draw_lognormal(camera, rng);
    case Stage::caption: return scale * draw_lognormal(caption, rng);
    case Stage::heatmap: return scale * draw_lognormal(heatmap, rng);
    case Stage::llm: break;
  }
  auto [n, p] = draw_llm(rng);
  return n + p;
}

std::pair<double, double> LatencyProfile::draw_llm(Rng& rng) const {
  const double n = scale * draw_lognormal(llm_network, rng);
  const double p = scale * draw_lognormal(llm_processing, rng);
  return {n, p};
}

namespace {

double normal_quantile(double p) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> mapped_quantiles(const std::vector<double>& z, double sigma, double lo, double hi) {
  std::vector<double> q(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) q[i] = std::exp(sigma * z[i]);
  const double qmin = q.front(), qmax = q.back();
  for (double& v : q) v = lo + (v - qmin) / (qmax - qmin) * (hi - lo);
  q.front() = lo;
  q.back() = hi;
  return q;
}

}  // namespace

std::vector<double> synthetic_totals(std::size_t n, double lo, double hi, double target_mean) {
  if (n < 2 || !(hi > lo) || !(target_mean > lo && target_mean < hi))
    throw ValidationError({"n", "lo", "hi", "target_mean"}, "synthetic workload needs n >= 2 and lo < mean < hi");
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = normal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n));
  auto mean_for = [&](double sigma) {
    const auto q = mapped_quantiles(z, sigma, lo, hi);
    return std::accumulate(q.begin(), q.end(), 0.0) / static_cast<double>(n);
  };
  double a = 1e-3, b = 5.0;  // mean decreases with sigma
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (a + b);
    if (mean_for(mid) > target_mean)
      a = mid;
    else
      b = mid;
  }
  return mapped_quantiles(z, 0.5 * (a + b), lo, hi);
}

LatencyRecord split_total(double total_s, Trigger trigger, std::uint64_t seq, std::string run_id) {
  LatencyRecord r;
  r.trigger = trigger;
  r.seq = seq;
  r.run_id = std::move(run_id);
  r.t_camera_s = 0.02 * total_s;
  r.t_caption_s = 0.38 * total_s;
  r.t_heatmap_s = 0.10 * total_s;
  const double llm = total_s - *r.t_camera_s - *r.t_caption_s - *r.t_heatmap_s;
  set_llm(r, 0.3 * llm, llm - 0.3 * llm);
  total(r);
  return r;
}

std::vector<LatencyRecord> simulate_triggers(std::span<const double> request_times, Trigger trigger,
                                             std::span<const double> service, Rng& rng) {
  if (service.empty()) throw ValidationError({"service"}, "no service-time samples");
  std::vector<double> times(request_times.begin(), request_times.end());
  std::sort(times.begin(), times.end());
  std::vector<LatencyRecord> out;
  double free_at = -1e300;
  std::uint64_t seq = 0;
  for (double t : times) {
    const double start = std::max(t, free_at);
    const double s = service[rng.index(service.size())];
    free_at = start + s;
    LatencyRecord r = split_total(s, trigger, ++seq);
    *r.t_camera_s += start - t;
    total(r);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<double> interval_requests(double interval_s, double horizon_s) {
  if (!(interval_s > 0.0)) throw ValidationError({"interval_s"}, "interval must be positive");
  std::vector<double> out;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * interval_s;
    if (t >= horizon_s) break;
    out.push_back(t);
  }
  return out;
}

std::vector<double> event_requests(double min_gap_s, double max_gap_s, double horizon_s, Rng& rng) {
  if (!(min_gap_s > 0.0) || max_gap_s < min_gap_s) throw ValidationError({"min_gap_s", "max_gap_s"}, "bad gap range");
  std::vector<double> out;
  for (double t = rng.uniform(min_gap_s, max_gap_s); t < horizon_s; t += rng.uniform(min_gap_s, max_gap_s))
    out.push_back(t);
  return out;
}

}  // namespace xnav
