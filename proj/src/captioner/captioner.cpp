#include "xnav/captioner/captioner.hpp"

#include <array>
#include <cctype>
#include <chrono>
#include <map>

#include "xnav/core/base64.hpp"
#include "xnav/saliency/png.hpp"

namespace xnav {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string number_word(std::size_t n) {
  static constexpr std::array<const char*, 11> words{"no",  "one", "two",   "three", "four", "five",
                                                     "six", "seven", "eight", "nine", "ten"};
  return n < words.size() ? words[n] : std::to_string(n);
}

std::string people(std::size_t n) { return n == 1 ? "a person" : number_word(n) + " people"; }

std::string join_clauses(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += i + 1 == parts.size() ? " and " : ", ";
    out += parts[i];
  }
  return out;
}

}  // namespace

std::string sanitize(std::string_view text) {
  std::size_t b = 0, e = text.size();
  while (b < e && is_space(text[b])) ++b;
  while (e > b && is_space(text[e - 1])) --e;
  std::string s(text.substr(b, e - b));
  if (s.empty()) throw ValidationError({"text"}, "caption text is empty");

  // first sentence: up to a terminator followed by whitespace or the end
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == s.size() || is_space(s[i + 1]))) {
      s.resize(i + 1);
      break;
    }
  }
  while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?' || is_space(s.back()))) s.pop_back();
  if (s.empty()) throw ValidationError({"text"}, "caption text has no words");
  for (char& c : s) {
    if (is_space(c)) break;
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return s + ".";
}

std::string mock_caption_text(std::span<const Annotation> annotations, std::string_view setting) {
  std::map<Activity, std::size_t> by_activity;
  std::size_t obstacles = 0;
  for (const Annotation& a : annotations) {
    if (a.kind == Annotation::Kind::human)
      ++by_activity[a.activity];
    else
      ++obstacles;
  }
  if (by_activity.empty() && obstacles == 0) return "an empty corridor.";

  std::vector<std::string> parts;
  // alphabetical by activity name
  for (Activity act : {Activity::conversing, Activity::idle, Activity::walking}) {
    auto it = by_activity.find(act);
    if (it == by_activity.end()) continue;
    const std::size_t n = it->second;
    switch (act) {
      case Activity::conversing: parts.push_back(people(n) + " having a conversation"); break;
      case Activity::idle: parts.push_back(people(n) + " standing"); break;
      case Activity::walking: parts.push_back(people(n) + " walking"); break;
    }
  }
  if (obstacles == 1) parts.emplace_back("an obstacle");
  if (obstacles > 1) parts.push_back(number_word(obstacles) + " obstacles");
  const std::string place = setting.empty() ? "hallway" : std::string(setting);
  const bool vowel = std::string_view("aeiou").find(place.front()) != std::string_view::npos;
  return join_clauses(parts) + (vowel ? " in an " : " in a ") + place + ".";
}

Caption caption(const Frame& frame, const BackendConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  Caption c;
  c.backend_id = config.id();
  c.stamp = frame.stamp;
  c.source_seq = frame.seq;
  if (config.kind == BackendKind::mock) {
    c.text = mock_caption_text(frame.annotations, frame.setting);
  } else {
    const RgbImage img{frame.width, frame.height, frame.to_rgb8(), {}};
    const nlohmann::json body{{"image_b64", base64_encode(encode_png(img))},
                              {"width", frame.width},
                              {"height", frame.height},
                              {"seq", frame.seq}};
    const nlohmann::json res = post_json(config, "/v1/caption", body);
    if (!res.is_object() || !res.contains("caption") || !res["caption"].is_string())
      throw ProtocolError("/v1/caption: response lacks a string 'caption'");
    try {
      c.text = sanitize(res["caption"].get<std::string>());
    } catch (const ValidationError&) {
      throw ProtocolError("/v1/caption: empty caption");
    }
  }
  c.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return c;
}

}  // namespace xnav
