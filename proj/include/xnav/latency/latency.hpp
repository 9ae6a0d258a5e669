#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "xnav/core/error.hpp"
#include "xnav/core/rng.hpp"
#include "xnav/latency/clock.hpp"

namespace xnav {

enum class Stage { camera, caption, heatmap, llm };
inline constexpr std::array<Stage, 4> kStages{Stage::camera, Stage::caption, Stage::heatmap, Stage::llm};

enum class Trigger { fixed_interval, manual, conflict_event };

std::string_view to_string(Stage s);
std::string_view to_string(Trigger t);
Trigger trigger_from_string(std::string_view s);

struct LatencyRecord {
  std::optional<double> t_camera_s;
  std::optional<double> t_caption_s;
  std::optional<double> t_heatmap_s;
  std::optional<double> t_llm_s;
  double t_llm_network_s{0.0};
  double t_llm_processing_s{0.0};
  double total_s{0.0};
  Trigger trigger{Trigger::fixed_interval};
  std::string run_id;
  std::uint64_t seq{0};

  std::optional<double>& field(Stage s);

  friend bool operator==(const LatencyRecord&, const LatencyRecord&) = default;
};

/// Sum of the four stages; stores it in total_s. Throws ValidationError
/// naming the first missing stage.
double total(LatencyRecord& record);

/// Sets the LLM split and t_llm_s = network + processing.
void set_llm(LatencyRecord& record, double network_s, double processing_s);

/// Both additivity identities hold within tol.
bool additive(const LatencyRecord& r, double tol = 1e-9);

/// Measures a thunk with the given clock and optionally stores the duration
/// in the record. Stages may not nest on one thread.
class StageTimer {
 public:
  StageTimer(Stage s, Clock& clock, LatencyRecord* record);
  ~StageTimer();
  StageTimer(const StageTimer&) = delete;
  StageTimer& operator=(const StageTimer&) = delete;
  double stop();

 private:
  Stage stage_;
  Clock& clock_;
  LatencyRecord* record_;
  double start_;
  bool stopped_{false};
};

template <class T>
struct Timed {
  T value;
  double seconds{0.0};
};

template <class F>
auto time_stage(Stage stage, F&& thunk, Clock& clock, LatencyRecord* record = nullptr) {
  using R = std::invoke_result_t<F>;
  StageTimer timer(stage, clock, record);
  if constexpr (std::is_void_v<R>) {
    std::forward<F>(thunk)();
    return Timed<std::monostate>{{}, timer.stop()};
  } else {
    R value = std::forward<F>(thunk)();
    const double s = timer.stop();
    return Timed<R>{std::move(value), s};
  }
}

struct StageOption {
  std::string option_id;
  double expected_latency_s{0.0};
  std::string quality_tag;
};

struct LatencyConfig {
  std::map<Stage, std::vector<StageOption>> stage_options;
  double t_max_s{25.0};
  std::map<std::string, double> lambda;  // quality_tag -> weight
  double compute_factor{1.0};            // C; latencies scale by 1/C

  void validate() const;
};

struct Selection {
  std::map<Stage, StageOption> chosen;
  double total_s{0.0};  // scaled by 1/C
  double quality{0.0};
};

class InfeasibleBudget : public Error {
 public:
  InfeasibleBudget(double min_total, double t_max);
  double min_total() const { return min_total_; }

 private:
  double min_total_;
};

/// Minimum expected total subject to total <= t_max; ties by higher
/// lambda-weighted quality, then smaller option ids in stage order.
Selection select_config(const LatencyConfig& config);

struct TriggerStats {
  std::size_t count{0};
  double mean{0.0};
  double min{0.0};
  double max{0.0};
  double p95{0.0};  // nearest rank
  double fraction_above{0.0};
};

/// Descriptive statistics of total_s per trigger. Throws ValidationError for
/// an empty list.
std::map<Trigger, TriggerStats> trigger_stats(std::span<const LatencyRecord> records, double threshold_s = 25.0);
TriggerStats summarize_totals(std::span<const double> totals, double threshold_s = 25.0);

inline constexpr std::string_view kLatencyCsvHeader =
    "run_id,seq,trigger,t_camera,t_caption,t_heatmap,t_llm_network,t_llm_processing,total";
void write_latency_csv(std::ostream& out, std::span<const LatencyRecord> records);
std::vector<LatencyRecord> read_latency_csv(std::istream& in);

/// Per-stage latency model for mock backends. Each stage draws
/// scale * lognormal(median, sigma).
struct LatencyProfile {
  struct Dist {
    double median{0.0};
    double sigma{0.0};
  };
  std::string name;
  Dist camera, caption, heatmap, llm_network, llm_processing;
  double scale{1.0};

  /// Sub-second stages for desk runs.
  static LatencyProfile desk();
  /// Totals around 20 s, as measured on the hosted-API deployment.
  static LatencyProfile hosted();
  static LatencyProfile by_name(std::string_view name);

  double draw(Stage s, Rng& rng) const;
  /// (network, processing)
  std::pair<double, double> draw_llm(Rng& rng) const;
};

/// Deterministic n-sample workload: lognormal quantiles mapped affinely
/// onto [lo, hi], shape chosen so the mean is close to target_mean.
std::vector<double> synthetic_totals(std::size_t n = 88, double lo = 5.986, double hi = 50.688,
                                     double target_mean = 20.0);

/// Splits a total into stages with fixed shares.
LatencyRecord split_total(double total_s, Trigger trigger, std::uint64_t seq, std::string run_id = "synthetic");

/// Single-server queue of explanation requests. Waiting time counts toward
/// the camera stage. Service times are drawn from `service`.
std::vector<LatencyRecord> simulate_triggers(std::span<const double> request_times, Trigger trigger,
                                             std::span<const double> service, Rng& rng);

/// Request times every interval_s over [0, horizon_s).
std::vector<double> interval_requests(double interval_s, double horizon_s);
/// Request times of sparse events: gaps uniform in [min_gap_s, max_gap_s].
std::vector<double> event_requests(double min_gap_s, double max_gap_s, double horizon_s, Rng& rng);

}  // namespace xnav
