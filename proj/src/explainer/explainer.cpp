#include "xnav/explainer/explainer.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <fstream>

#include "xnav/saliency/png.hpp"

namespace xnav {

const std::string_view kPromptTemplate =
    "You are a mobile robot trying to avoid obstacles to reach your destination. The image caption is: "
    "'{caption}'. The heatmap analysis shows: '{heatmap_summary}'. Provide a short, one-sentence description "
    "of your view. Do not explicitly state the heatmap summary percentages and details. Start each "
    "description with 'I see' and end with a random suitable rerouting phrase of your choice. Replace 'the "
    "image' anywhere in your description with 'my view'";

namespace {

constexpr std::string_view kCaptionSlot = "{caption}";
constexpr std::string_view kSummarySlot = "{heatmap_summary}";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

// Positions of sentence terminators followed by whitespace or the end.
std::vector<std::size_t> sentence_ends(std::string_view s) {
  std::vector<std::size_t> ends;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (is_terminator(s[i]) && (i + 1 == s.size() || is_space(s[i + 1]))) ends.push_back(i);
  return ends;
}

std::string replace_the_image(std::string s) {
  for (;;) {
    const std::size_t pos = lower(s).find("the image");
    if (pos == std::string::npos) return s;
    s.replace(pos, 9, "my view");
  }
}

}  // namespace

nlohmann::json explanation_to_json(const Explanation& e) {
  return nlohmann::ordered_json{{"seq", e.seq},
                                {"stamp", e.stamp},
                                {"text", e.text},
                                {"caption_seq", e.caption_seq},
                                {"heatmap_seq", e.heatmap_seq},
                                {"latency_s", e.latency_s},
                                {"latency_network_s", e.latency_network_s},
                                {"latency_processing_s", e.latency_processing_s},
                                {"backend_id", e.backend_id},
                                {"prompt", e.prompt}};
}

Explanation explanation_from_json(const nlohmann::json& j) {
  try {
    Explanation e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.stamp = j.at("stamp").get<double>();
    e.text = j.at("text").get<std::string>();
    e.caption_seq = j.at("caption_seq").get<std::uint64_t>();
    e.heatmap_seq = j.at("heatmap_seq").get<std::uint64_t>();
    e.latency_s = j.at("latency_s").get<double>();
    e.latency_network_s = j.value("latency_network_s", 0.0);
    e.latency_processing_s = j.value("latency_processing_s", e.latency_s);
    e.backend_id = j.at("backend_id").get<std::string>();
    e.prompt = j.value("prompt", std::string{});
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("explanation: ") + ex.what());
  }
}

std::string build_prompt(std::string_view caption, std::string_view summary) {
  if (caption.empty()) throw ValidationError({"caption"}, "build_prompt: empty caption");
  if (summary.empty()) throw ValidationError({"summary"}, "build_prompt: empty heatmap summary");
  const std::size_t c = kPromptTemplate.find(kCaptionSlot);
  const std::size_t h = kPromptTemplate.find(kSummarySlot);
  std::string out;
  out.reserve(kPromptTemplate.size() + caption.size() + summary.size());
  out += kPromptTemplate.substr(0, c);
  out += caption;
  out += kPromptTemplate.substr(c + kCaptionSlot.size(), h - c - kCaptionSlot.size());
  out += summary;
  out += kPromptTemplate.substr(h + kSummarySlot.size());
  return out;
}

std::optional<std::string> caption_from_prompt(std::string_view prompt) {
  const std::string_view head = kPromptTemplate.substr(0, kPromptTemplate.find(kCaptionSlot));
  const std::size_t mid_begin = kPromptTemplate.find(kCaptionSlot) + kCaptionSlot.size();
  const std::string_view mid = kPromptTemplate.substr(mid_begin, kPromptTemplate.find(kSummarySlot) - mid_begin);
  if (prompt.substr(0, head.size()) != head) return std::nullopt;
  const std::size_t end = prompt.rfind(mid);
  if (end == std::string_view::npos || end < head.size()) return std::nullopt;
  return std::string(prompt.substr(head.size(), end - head.size()));
}

std::string_view to_string(FormatViolation v) {
  switch (v) {
    case FormatViolation::missing_i_see_prefix: return "missing-I-see-prefix";
    case FormatViolation::contains_the_image: return "contains-the-image";
    case FormatViolation::multi_sentence: return "multi-sentence";
    case FormatViolation::empty: break;
  }
  return "empty";
}

std::vector<FormatViolation> validate_format(std::string_view text) {
  const std::string t = trim(text);
  if (t.empty()) return {FormatViolation::empty};
  std::vector<FormatViolation> out;
  if (t.rfind("I see", 0) != 0 || (t.size() > 5 && !is_space(t[5]))) out.push_back(FormatViolation::missing_i_see_prefix);
  if (lower(t).find("the image") != std::string::npos) out.push_back(FormatViolation::contains_the_image);
  const auto ends = sentence_ends(t);
  if (ends.size() > 1 || (ends.size() == 1 && ends[0] + 1 != t.size()))
    out.push_back(FormatViolation::multi_sentence);
  return out;
}

std::string repair_format(std::string_view text) {
  std::string s = replace_the_image(trim(text));
  const auto ends = sentence_ends(s);
  if (!ends.empty()) s.resize(ends.front() + 1);
  if (s.rfind("I see", 0) != 0 || (s.size() > 5 && !is_space(s[5]))) {
    for (std::string_view lead : {"my view shows ", "my view depicts ", "my view contains "})
      if (lower(s).rfind(lead, 0) == 0) {
        s.erase(0, lead.size());
        break;
      }
    if (!s.empty()) s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
    s = "I see " + s;
  }
  if (!s.empty() && !is_terminator(s.back())) s += '.';
  return s;
}

std::string mock_explanation_text(std::string_view caption, Rng& rng) {
  std::string body = trim(caption);
  while (!body.empty() && is_terminator(body.back())) body.pop_back();
  const std::string_view phrase = kReroutingPhrases[rng.index(kReroutingPhrases.size())];
  return "I see " + replace_the_image(body) + "; " + std::string(phrase);
}

Explanation explain(const std::string& prompt, const BackendConfig& config, Rng& rng) {
  config.validate();
  Explanation e;
  e.prompt = prompt;
  e.backend_id = config.id();
  const auto start = std::chrono::steady_clock::now();
  std::string raw;
  if (config.kind == BackendKind::mock) {
    auto cap = caption_from_prompt(prompt);
    if (!cap || cap->empty()) throw ValidationError({"prompt"}, "prompt does not carry a caption");
    raw = mock_explanation_text(*cap, rng);
  } else {
    double first_byte = 0.0;
    const nlohmann::json res = post_json(
        config, "/v1/complete", {{"prompt", prompt}, {"max_tokens", 60}, {"temperature", 0.7}}, &first_byte);
    if (!res.is_object() || !res.contains("text") || !res["text"].is_string())
      throw ProtocolError("/v1/complete: response lacks a string 'text'");
    raw = res["text"].get<std::string>();
    e.latency_network_s = first_byte;
  }
  e.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  e.latency_processing_s = std::max(0.0, e.latency_s - e.latency_network_s);

  if (validate_format(raw).empty()) {
    e.text = trim(raw);
  } else {
    const std::string fixed = repair_format(raw);
    const auto v = validate_format(fixed);
    if (!v.empty()) throw FormatError("explanation violates format after repair: " + std::string(to_string(v.front())));
    e.text = fixed;
  }
  return e;
}

ArtifactSet emit(const Explanation& explanation, const HeatmapResult& heatmap, const Frame& frame,
                 const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!validate_format(explanation.text).empty()) throw FormatError("refusing to emit a malformed explanation");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  char prefix[32];
  std::snprintf(prefix, sizeof prefix, "%06llu", static_cast<unsigned long long>(explanation.seq));
  ArtifactSet a{dir / (std::string(prefix) + "_frame.png"), dir / (std::string(prefix) + "_overlay.png"),
                dir / (std::string(prefix) + "_explanation.json")};
  for (const fs::path& p : {a.frame_png, a.overlay_png, a.explanation_json})
    if (fs::exists(p)) throw Error("artifact already exists: " + p.string());

  char stamp[32];
  std::snprintf(stamp, sizeof stamp, "%.3f", explanation.stamp);
  const std::map<std::string, std::string> text{{"stamp", stamp}, {"seq", prefix}};
  write_png(a.frame_png, {frame.width, frame.height, frame.to_rgb8(), text});
  write_png(a.overlay_png, {frame.width, frame.height, overlay_rgb8(frame, heatmap), text});
  std::ofstream out(a.explanation_json);
  out << explanation_to_json(explanation).dump(2) << '\n';
  if (!out) throw Error("cannot write " + a.explanation_json.string());
  return a;
}

std::optional<Pairer::Pair> Pairer::add_caption(const Caption& c, std::uint64_t caption_seq, double now) {
  auto it = summaries_.find(c.source_seq);
  if (it == summaries_.end()) {
    captions_[c.source_seq] = {c, caption_seq, now};
    return std::nullopt;
  }
  Pair p{c, caption_seq, it->second.seq, std::move(it->second.summary)};
  summaries_.erase(it);
  return p;
}

std::optional<Pairer::Pair> Pairer::add_summary(std::uint64_t frame_seq, std::uint64_t heatmap_seq,
                                                std::string summary, double now) {
  auto it = captions_.find(frame_seq);
  if (it == captions_.end()) {
    summaries_[frame_seq] = {std::move(summary), heatmap_seq, now};
    return std::nullopt;
  }
  Pair p{std::move(it->second.caption), it->second.seq, heatmap_seq, std::move(summary)};
  captions_.erase(it);
  return p;
}

std::vector<std::uint64_t> Pairer::expire(double now) {
  std::vector<std::uint64_t> dropped;
  std::erase_if(captions_, [&](const auto& kv) {
    if (now - kv.second.since <= timeout_s_) return false;
    dropped.push_back(kv.first);
    return true;
  });
  std::erase_if(summaries_, [&](const auto& kv) {
    if (now - kv.second.since <= timeout_s_) return false;
    dropped.push_back(kv.first);
    return true;
  });
  std::sort(dropped.begin(), dropped.end());
  return dropped;
}

}  // namespace xnav
