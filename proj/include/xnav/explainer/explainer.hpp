#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "xnav/captioner/captioner.hpp"
#include "xnav/core/rng.hpp"
#include "xnav/saliency/gradcam.hpp"

namespace xnav {

/// Guiding prompt with {caption} and {heatmap_summary} slots. Kept
/// byte-identical to data/prompt_template.txt.
extern const std::string_view kPromptTemplate;

inline constexpr std::array<std::string_view, 5> kReroutingPhrases{
    "rerouting to keep clear.", "adjusting my path now.", "taking a wider route.", "going around politely.",
    "finding another way through."};

class FormatError : public Error {
 public:
  using Error::Error;
};

struct Explanation {
  std::uint64_t seq{0};
  double stamp{0.0};
  std::string text;
  std::uint64_t caption_seq{0};
  std::uint64_t heatmap_seq{0};
  std::string prompt;
  double latency_s{0.0};
  double latency_network_s{0.0};
  double latency_processing_s{0.0};
  std::string backend_id;

  friend bool operator==(const Explanation&, const Explanation&) = default;
};

nlohmann::json explanation_to_json(const Explanation& e);
Explanation explanation_from_json(const nlohmann::json& j);

/// Single-pass substitution; braces inside the values are kept literally.
/// Throws ValidationError for an empty caption or summary.
std::string build_prompt(std::string_view caption, std::string_view summary);

/// Caption slot of a rendered prompt, or nullopt when the text does not
/// follow the template.
std::optional<std::string> caption_from_prompt(std::string_view prompt);

enum class FormatViolation { missing_i_see_prefix, contains_the_image, multi_sentence, empty };

std::string_view to_string(FormatViolation v);

std::vector<FormatViolation> validate_format(std::string_view text);

/// Prefix "I see", "the image" -> "my view", first sentence only.
std::string repair_format(std::string_view text);

/// "I see {caption without period}; {phrase}" with a phrase drawn from rng.
std::string mock_explanation_text(std::string_view caption, Rng& rng);

/// Runs the backend on a rendered prompt. The mock reads the caption back
/// out of the prompt. Output failing validate_format gets one repair pass,
/// then FormatError.
Explanation explain(const std::string& prompt, const BackendConfig& config, Rng& rng);

struct ArtifactSet {
  std::filesystem::path frame_png;
  std::filesystem::path overlay_png;
  std::filesystem::path explanation_json;
};

/// Writes {seq:06}_frame.png, {seq:06}_overlay.png and
/// {seq:06}_explanation.json into dir. Refuses to overwrite.
ArtifactSet emit(const Explanation& explanation, const HeatmapResult& heatmap, const Frame& frame,
                 const std::filesystem::path& dir);

/// Matches captions and heatmap summaries by source frame seq.
class Pairer {
 public:
  struct Pair {
    Caption caption;
    std::uint64_t caption_seq{0};  // bus seq of the caption message
    std::uint64_t heatmap_seq{0};  // bus seq of the summary message
    std::string summary;
  };

  explicit Pairer(double timeout_s = 60.0) : timeout_s_(timeout_s) {}

  std::optional<Pair> add_caption(const Caption& c, std::uint64_t caption_seq, double now);
  std::optional<Pair> add_summary(std::uint64_t frame_seq, std::uint64_t heatmap_seq, std::string summary,
                                  double now);
  /// Drops entries older than the timeout; returns the dropped frame seqs.
  std::vector<std::uint64_t> expire(double now);
  std::size_t waiting() const { return captions_.size() + summaries_.size(); }

 private:
  struct PendingCaption {
    Caption caption;
    std::uint64_t seq{0};
    double since{0.0};
  };
  struct PendingSummary {
    std::string summary;
    std::uint64_t seq{0};
    double since{0.0};
  };
  double timeout_s_;
  std::map<std::uint64_t, PendingCaption> captions_;  // by frame seq
  std::map<std::uint64_t, PendingSummary> summaries_;
};

}  // namespace xnav
