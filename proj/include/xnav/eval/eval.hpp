#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xnav/sim/metrics.hpp"

namespace xnav::eval {

/// All keywords must appear as whole words (case-insensitive).
struct KeywordRule {
  std::vector<std::string> keywords;
  bool enabled{true};
};

/// {people, conversation}, {group}, and the lone-person rule {person}.
std::vector<KeywordRule> default_rules(bool person_alone = true);

/// Throws ValidationError when no rule is enabled.
bool detect_conflict_from_caption(std::string_view caption, const std::vector<KeywordRule>& rules);

struct ConfusionCounts {
  std::size_t tp{0}, fp{0}, fn{0}, tn{0};
  std::size_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts confusion(const std::vector<bool>& predictions, const std::vector<bool>& truths);

struct ClassificationMetrics {
  double accuracy{0.0};
  std::optional<double> precision, recall, f1;
};

/// Undefined ratios are left empty rather than reported as zero.
ClassificationMetrics metrics(const ConfusionCounts& c);

double preference_score(std::size_t u, std::size_t n, std::size_t t);

enum class Answer { yes, neutral, no };
enum class Preference { prefer, neutral, not_prefer };

struct SurveyResponse {
  std::string participant;
  std::array<Answer, 4> answers{};
  Preference preference{Preference::neutral};
};

struct Survey {
  std::vector<SurveyResponse> responses;
};

inline constexpr std::string_view kSurveyHeader = "participant,q1,q2,q3,q4,preference";

Survey read_survey(std::istream& in);
Survey load_survey(const std::string& path);

struct SurveySummary {
  std::size_t participants{0};
  std::array<std::array<std::size_t, 3>, 4> counts{};  // [question][yes, neutral, no]
  std::size_t prefer{0}, neutral{0}, not_prefer{0};
  double preference_score{0.0};
  double epsilon_hat{0.0};
};

SurveySummary summarize_survey(const Survey& s);

/// Mean of yes=1, neutral=0.5, no=0 over every answer, floored at
/// 1/(2 * questions * participants).
double epsilon_from_survey(const Survey& s);

struct EpsilonState {
  double value{0.0};
  bool enabled{false};
  double delta{0.0};
};

/// Disabled states report 0; enabled values add delta and clamp to 1.
EpsilonState epsilon_update(EpsilonState state);

struct LabelRow {
  std::string item_id;
  bool predicted{false};
  bool truth{false};
};

inline constexpr std::string_view kLabelsHeader = "item_id,predicted,truth";

std::vector<LabelRow> read_labels(std::istream& in);
std::vector<LabelRow> load_labels(const std::string& path);
void write_labels(std::ostream& out, const std::vector<LabelRow>& rows);
ConfusionCounts confusion(const std::vector<LabelRow>& rows);

struct Comparison {
  std::string scenario_id;
  sim::RunMetrics woe, we;
};

/// Throws ValidationError on mismatched scenario ids.
Comparison compare_runs(const sim::RunMetrics& woe, const sim::RunMetrics& we);
std::string render_text(const Comparison& c);
std::string render_csv(const Comparison& c);

std::string render_text(const SurveySummary& s);
std::string render_csv(const SurveySummary& s);
std::string render_text(const ConfusionCounts& c);
std::string render_csv(const ConfusionCounts& c);

}  // namespace xnav::eval
