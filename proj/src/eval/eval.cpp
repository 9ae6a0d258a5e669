#include "xnav/eval/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "xnav/core/error.hpp"

namespace xnav::eval {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::set<std::string> words(std::string_view text) {
  std::set<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.insert(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.insert(cur);
  return out;
}

std::string trim(std::string s) {
  auto sp = [](unsigned char c) { return std::isspace(c); };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), sp));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), sp).base(), s.end());
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) f.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') f.emplace_back();
  return f;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string signed_fixed(double v, int digits) {
  if (std::abs(v) < 0.5 * std::pow(10.0, -digits)) v = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t width, bool left = false) {
  if (s.size() >= width) return s;
  return left ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
}

}  // namespace

std::vector<KeywordRule> default_rules(bool person_alone) {
  return {{{"people", "conversation"}, true}, {{"group"}, true}, {{"person"}, person_alone}};
}

bool detect_conflict_from_caption(std::string_view caption, const std::vector<KeywordRule>& rules) {
  if (std::none_of(rules.begin(), rules.end(), [](const KeywordRule& r) { return r.enabled && !r.keywords.empty(); }))
    throw ValidationError({"keyword_rules"}, "no enabled keyword rule");
  const auto w = words(caption);
  for (const KeywordRule& r : rules) {
    if (!r.enabled || r.keywords.empty()) continue;
    if (std::all_of(r.keywords.begin(), r.keywords.end(), [&](const std::string& k) { return w.count(lower(k)); }))
      return true;
  }
  return false;
}

ConfusionCounts confusion(const std::vector<bool>& predictions, const std::vector<bool>& truths) {
  if (predictions.size() != truths.size())
    throw ValidationError({"predictions", "truths"}, "predictions and truths differ in length");
  if (predictions.empty()) throw ValidationError({"predictions"}, "no items to score");
  ConfusionCounts c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i])
      ++(truths[i] ? c.tp : c.fp);
    else
      ++(truths[i] ? c.fn : c.tn);
  }
  return c;
}

ClassificationMetrics metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw ValidationError({"counts"}, "empty confusion matrix");
  ClassificationMetrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  if (c.tp + c.fp > 0) m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (m.precision && m.recall && *m.precision + *m.recall > 0)
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  return m;
}

double preference_score(std::size_t u, std::size_t n, std::size_t t) {
  if (t == 0) throw ValidationError({"t"}, "no participants");
  if (u + n > t) throw ValidationError({"u", "n"}, "u + n exceeds participant count");
  return (static_cast<double>(u) + 0.5 * static_cast<double>(n)) / static_cast<double>(t) * 100.0;
}

namespace {

Answer parse_answer(const std::string& s, const std::string& where) {
  const std::string v = lower(s);
  if (v == "yes") return Answer::yes;
  if (v == "neutral") return Answer::neutral;
  if (v == "no") return Answer::no;
  throw ParseError("survey: bad answer '" + s + "' at " + where);
}

Preference parse_preference(const std::string& s, const std::string& where) {
  const std::string v = lower(s);
  if (v == "prefer") return Preference::prefer;
  if (v == "neutral") return Preference::neutral;
  if (v == "not") return Preference::not_prefer;
  throw ParseError("survey: bad preference '" + s + "' at " + where);
}

bool parse_bool(const std::string& s, const std::string& where) {
  const std::string v = lower(s);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParseError("labels: bad boolean '" + s + "' at " + where);
}

}  // namespace

Survey read_survey(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != kSurveyHeader) throw ParseError("survey: bad header");
  Survey s;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    const std::string where = "line " + std::to_string(lineno);
    if (f.size() != 6) throw ParseError("survey: expected 6 fields at " + where);
    SurveyResponse r;
    r.participant = f[0];
    for (std::size_t q = 0; q < 4; ++q) r.answers[q] = parse_answer(f[q + 1], where);
    r.preference = parse_preference(f[5], where);
    s.responses.push_back(r);
  }
  if (s.responses.empty()) throw ValidationError({"participants"}, "survey has no participants");
  return s;
}

Survey load_survey(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open survey file " + path);
  return read_survey(in);
}

double epsilon_from_survey(const Survey& s) {
  if (s.responses.empty()) throw ValidationError({"participants"}, "survey has no participants");
  double sum = 0.0;
  for (const auto& r : s.responses)
    for (Answer a : r.answers) sum += a == Answer::yes ? 1.0 : a == Answer::neutral ? 0.5 : 0.0;
  const double n = 4.0 * static_cast<double>(s.responses.size());
  return std::max(sum / n, 1.0 / (2.0 * n));
}

SurveySummary summarize_survey(const Survey& s) {
  SurveySummary out;
  out.participants = s.responses.size();
  for (const auto& r : s.responses) {
    for (std::size_t q = 0; q < 4; ++q) ++out.counts[q][static_cast<std::size_t>(r.answers[q])];
    switch (r.preference) {
      case Preference::prefer: ++out.prefer; break;
      case Preference::neutral: ++out.neutral; break;
      case Preference::not_prefer: ++out.not_prefer; break;
    }
  }
  out.preference_score = preference_score(out.prefer, out.neutral, out.participants);
  out.epsilon_hat = epsilon_from_survey(s);
  return out;
}

EpsilonState epsilon_update(EpsilonState state) {
  if (!state.enabled) {
    state.value = 0.0;
    return state;
  }
  state.value = std::clamp(state.value + state.delta, 0.0, 1.0);
  return state;
}

std::vector<LabelRow> read_labels(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != kLabelsHeader) throw ParseError("labels: bad header");
  std::vector<LabelRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    const std::string where = "line " + std::to_string(lineno);
    if (f.size() != 3) throw ParseError("labels: expected 3 fields at " + where);
    rows.push_back({f[0], parse_bool(f[1], where), parse_bool(f[2], where)});
  }
  return rows;
}

std::vector<LabelRow> load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open labels file " + path);
  return read_labels(in);
}

void write_labels(std::ostream& out, const std::vector<LabelRow>& rows) {
  out << kLabelsHeader << '\n';
  for (const auto& r : rows)
    out << r.item_id << ',' << (r.predicted ? "true" : "false") << ',' << (r.truth ? "true" : "false") << '\n';
}

ConfusionCounts confusion(const std::vector<LabelRow>& rows) {
  std::vector<bool> p, t;
  for (const auto& r : rows) {
    p.push_back(r.predicted);
    t.push_back(r.truth);
  }
  return confusion(p, t);
}

Comparison compare_runs(const sim::RunMetrics& woe, const sim::RunMetrics& we) {
  if (woe.scenario_id != we.scenario_id)
    throw ValidationError({"scenario_id"},
                          "cannot compare runs of different scenarios: " + woe.scenario_id + " vs " + we.scenario_id);
  return {woe.scenario_id, woe, we};
}

namespace {

struct Row {
  std::string metric, woe, we, delta;
};

std::vector<Row> comparison_rows(const Comparison& c) {
  // Conflict detections come from the explanation pipeline, so a run with it
  // disabled has none to report.
  auto conflicts = [](const sim::RunMetrics& m) {
    return m.epsilon == 0.0 ? std::string("--") : std::to_string(m.conflicts_detected);
  };
  const bool both = c.woe.epsilon != 0.0 && c.we.epsilon != 0.0;
  return {
      {"Total Trajectory (m)", fixed(c.woe.total_trajectory_m, 2), fixed(c.we.total_trajectory_m, 2),
       signed_fixed(c.we.total_trajectory_m - c.woe.total_trajectory_m, 2)},
      {"Total Time (s)", fixed(c.woe.total_time_s, 1), fixed(c.we.total_time_s, 1),
       signed_fixed(c.we.total_time_s - c.woe.total_time_s, 1)},
      {"Social Conflicts Detected", conflicts(c.woe), conflicts(c.we),
       both ? signed_fixed(c.we.conflicts_detected - c.woe.conflicts_detected, 0) : "--"},
      {"Sudden Stops", std::to_string(c.woe.sudden_stops), std::to_string(c.we.sudden_stops),
       signed_fixed(c.we.sudden_stops - c.woe.sudden_stops, 0)},
      {"Explainability (eps)", fixed(c.woe.epsilon, 2), fixed(c.we.epsilon, 2),
       signed_fixed(c.we.epsilon - c.woe.epsilon, 2)},
  };
}

}  // namespace

std::string render_text(const Comparison& c) {
  std::ostringstream out;
  out << "scenario: " << c.scenario_id << '\n';
  out << pad("Metric", 26, true) << pad("WoE", 9) << pad("WE", 9) << pad("Delta", 9) << '\n';
  for (const Row& r : comparison_rows(c))
    out << pad(r.metric, 26, true) << pad(r.woe, 9) << pad(r.we, 9) << pad(r.delta, 9) << '\n';
  return out.str();
}

std::string render_csv(const Comparison& c) {
  std::ostringstream out;
  out << "metric,woe,we,delta\n";
  for (const Row& r : comparison_rows(c)) out << r.metric << ',' << r.woe << ',' << r.we << ',' << r.delta << '\n';
  return out.str();
}

std::string render_text(const SurveySummary& s) {
  std::ostringstream out;
  const double t = static_cast<double>(s.participants);
  out << "participants: " << s.participants << '\n';
  out << pad("Question", 10, true) << pad("Yes", 8) << pad("Neutral", 9) << pad("No", 8) << '\n';
  for (std::size_t q = 0; q < 4; ++q) {
    out << pad("q" + std::to_string(q + 1), 10, true);
    out << pad(fixed(100.0 * s.counts[q][0] / t, 1) + "%", 8) << pad(fixed(100.0 * s.counts[q][1] / t, 1) + "%", 9)
        << pad(fixed(100.0 * s.counts[q][2] / t, 1) + "%", 8) << '\n';
  }
  out << "preference: prefer " << s.prefer << ", neutral " << s.neutral << ", not " << s.not_prefer << '\n';
  out << "PS: " << fixed(s.preference_score, 1) << "%\n";
  out << "epsilon_hat: " << fixed(s.epsilon_hat, 4) << '\n';
  return out.str();
}

std::string render_csv(const SurveySummary& s) {
  std::ostringstream out;
  out << "key,value\n";
  out << "participants," << s.participants << '\n';
  for (std::size_t q = 0; q < 4; ++q) {
    const std::string k = "q" + std::to_string(q + 1);
    out << k << "_yes," << s.counts[q][0] << '\n' << k << "_neutral," << s.counts[q][1] << '\n'
        << k << "_no," << s.counts[q][2] << '\n';
  }
  out << "prefer," << s.prefer << "\nneutral," << s.neutral << "\nnot," << s.not_prefer << '\n';
  out << "preference_score," << fixed(s.preference_score, 4) << '\n';
  out << "epsilon_hat," << fixed(s.epsilon_hat, 6) << '\n';
  return out.str();
}

std::string render_text(const ConfusionCounts& c) {
  const ClassificationMetrics m = metrics(c);
  auto pct = [](const std::optional<double>& v) { return v ? fixed(100.0 * *v, 2) + "%" : std::string("n/a"); };
  std::ostringstream out;
  out << "items: " << c.total() << '\n';
  out << pad("", 16, true) << pad("truth+", 8) << pad("truth-", 8) << '\n';
  out << pad("predicted+", 16, true) << pad("TP " + std::to_string(c.tp), 8) << pad("FP " + std::to_string(c.fp), 8)
      << '\n';
  out << pad("predicted-", 16, true) << pad("FN " + std::to_string(c.fn), 8) << pad("TN " + std::to_string(c.tn), 8)
      << '\n';
  out << "accuracy: " << pct(m.accuracy) << '\n';
  out << "precision: " << pct(m.precision) << '\n';
  out << "recall: " << pct(m.recall) << '\n';
  out << "F1: " << pct(m.f1) << '\n';
  return out.str();
}

std::string render_csv(const ConfusionCounts& c) {
  const ClassificationMetrics m = metrics(c);
  auto opt = [](const std::optional<double>& v) { return v ? fixed(*v, 6) : std::string(); };
  std::ostringstream out;
  out << "tp,fp,fn,tn,accuracy,precision,recall,f1\n";
  out << c.tp << ',' << c.fp << ',' << c.fn << ',' << c.tn << ',' << fixed(m.accuracy, 6) << ',' << opt(m.precision)
      << ',' << opt(m.recall) << ',' << opt(m.f1) << '\n';
  return out.str();
}

}  // namespace xnav::eval
