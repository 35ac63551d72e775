#pragma once

/**
 * @file parsing.hpp
 * @brief Structured extraction of check verdicts and scalar judgments from
 *        free-text model output.
 *
 * Affirmative responses map to 1; no, uncertain, and unparseable all map
 * to 0 (ambiguity counts as insufficient evidence). Parse failures are
 * encoded in the returned values, never thrown.
 */

#include <algorithm>
#include <cctype>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "soc/registry.hpp"

namespace soc {

enum class Verdict { yes, no, uncertain, unparseable };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::yes: return "yes";
    case Verdict::no: return "no";
    case Verdict::uncertain: return "uncertain";
    case Verdict::unparseable: return "unparseable";
  }
  return "?";
}

/// The binarization rule: 1 iff affirmative.
inline int binarize(Verdict v) { return v == Verdict::yes ? 1 : 0; }

struct CheckVerdict {
  std::string check_id;
  Verdict verdict = Verdict::unparseable;
  std::string justification;
  int binary = 0;

  bool operator==(const CheckVerdict&) const = default;
};

struct ScalarJudgment {
  Verdict verdict = Verdict::unparseable;  // yes | no | unparseable
  double confidence = 0.0;

  bool operator==(const ScalarJudgment&) const = default;
};

/// Thread-safe sink for parse failures; the runner flushes it to
/// parse_failures.log in the run directory.
class ParseFailureLog {
 public:
  struct Entry {
    std::string context;
    std::string excerpt;
  };

  void add(std::string context, std::string excerpt) {
    std::lock_guard lock(mu_);
    if (excerpt.size() > 200) excerpt.resize(200);
    entries_.push_back({std::move(context), std::move(excerpt)});
  }

  std::vector<Entry> entries() const {
    std::lock_guard lock(mu_);
    return entries_;
  }

 private:
  mutable std::mutex mu_;
  std::vector<Entry> entries_;
};

/// Verdict synonym vocabulary. Shipped as data/verdict_synonyms.json; the
/// embedded copy backs the default table.
inline const char* kDefaultSynonymsJson = R"json({
  "yes": ["yes", "satisfied", "present", "true"],
  "no": ["no", "not satisfied", "absent", "false"],
  "uncertain": ["uncertain", "unclear", "cannot determine", "ambiguous"]
})json";

struct SynonymTable {
  std::vector<std::pair<std::string, Verdict>> phrases;  // lowercase

  static SynonymTable from_json(const nlohmann::json& j) {
    SynonymTable t;
    auto add = [&t](const char* key, Verdict v, const nlohmann::json& jj) {
      for (const auto& p : jj.at(key)) {
        std::string s = p.get<std::string>();
        std::transform(s.begin(), s.end(), s.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        t.phrases.emplace_back(std::move(s), v);
      }
    };
    add("yes", Verdict::yes, j);
    add("no", Verdict::no, j);
    add("uncertain", Verdict::uncertain, j);
    return t;
  }
};

inline const SynonymTable& default_synonyms() {
  static const SynonymTable table =
      SynonymTable::from_json(nlohmann::json::parse(kDefaultSynonymsJson));
  return table;
}

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

/// Strips list bullets and numbering ("- ", "* ", "3.", "2)") from the front.
inline std::string strip_bullet(std::string s) {
  s = trim(s);
  while (!s.empty() && (s[0] == '-' || s[0] == '*' || s[0] == '>')) {
    s.erase(0, 1);
    s = trim(s);
  }
  std::size_t i = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i > 0 && i < s.size() && (s[i] == '.' || s[i] == ')'))
    return trim(s.substr(i + 1));
  return s;
}

/// Earliest whole-word synonym match; longest phrase wins on position ties.
inline std::optional<std::pair<Verdict, std::size_t>> find_verdict_token(
    const std::string& text, const SynonymTable& table) {
  const std::string lo = lower(text);
  std::optional<std::pair<Verdict, std::size_t>> best;
  std::size_t best_pos = std::string::npos, best_len = 0;
  for (const auto& [phrase, verdict] : table.phrases) {
    std::size_t pos = 0;
    while ((pos = lo.find(phrase, pos)) != std::string::npos) {
      const bool left_ok = pos == 0 || !is_word_char(lo[pos - 1]);
      const std::size_t end = pos + phrase.size();
      const bool right_ok = end >= lo.size() || !is_word_char(lo[end]);
      if (left_ok && right_ok) {
        if (pos < best_pos || (pos == best_pos && phrase.size() > best_len)) {
          best_pos = pos;
          best_len = phrase.size();
          best = {{verdict, pos}};
        }
        break;
      }
      ++pos;
    }
  }
  return best;
}

/// Synonym match anchored at the start of `text`; returns verdict and the
/// number of characters consumed.
inline std::optional<std::pair<Verdict, std::size_t>> match_verdict_prefix(
    const std::string& text, const SynonymTable& table) {
  const std::string lo = lower(text);
  std::optional<std::pair<Verdict, std::size_t>> best;
  std::size_t best_len = 0;
  for (const auto& [phrase, verdict] : table.phrases) {
    if (lo.rfind(phrase, 0) != 0) continue;
    const std::size_t end = phrase.size();
    if (end < lo.size() && is_word_char(lo[end])) continue;
    if (phrase.size() > best_len) {
      best_len = phrase.size();
      best = {{verdict, phrase.size()}};
    }
  }
  return best;
}

/// First decimal number starting at or after `from`; returns value and
/// whether one was found.
inline std::optional<double> first_number_after(const std::string& text,
                                                std::size_t from) {
  for (std::size_t i = from; i < text.size(); ++i) {
    if (std::isdigit(static_cast<unsigned char>(text[i])) ||
        (text[i] == '.' && i + 1 < text.size() &&
         std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
      // Avoid numbers glued to words (e.g. "c2_1").
      if (i > 0 && is_word_char(text[i - 1]) &&
          !std::isdigit(static_cast<unsigned char>(text[i - 1])) &&
          text[i - 1] != '.')
        continue;
      std::size_t end = i;
      bool dot = false;
      while (end < text.size() &&
             (std::isdigit(static_cast<unsigned char>(text[end])) ||
              (text[end] == '.' && !dot))) {
        if (text[end] == '.') dot = true;
        ++end;
      }
      if (end < text.size() && text[end] == '%') continue;  // leave percents
      try {
        return std::stod(text.substr(i, end - i));
      } catch (...) {
        continue;
      }
    }
  }
  return std::nullopt;
}

inline std::size_t last_keyword_pos(const std::string& lo) {
  std::size_t pos = std::string::npos;
  for (const char* kw : {"score", "confidence"}) {
    std::size_t p = lo.rfind(kw);
    if (p != std::string::npos && (pos == std::string::npos || p > pos))
      pos = p;
  }
  return pos;
}

}  // namespace detail

/// Total over any input: exactly one verdict per check, in check order.
/// A check whose line is missing or malformed yields unparseable / binary 0.
/// Line grammar: `<check_id> : <verdict token> <separator> <justification>`,
/// tolerant of bullets, numbering, whitespace, and case.
inline std::vector<CheckVerdict> parse_check_verdicts(
    const std::string& text, const std::vector<Check>& checks,
    const SynonymTable& synonyms = default_synonyms(),
    ParseFailureLog* log = nullptr, const std::string& log_context = "") {
  std::vector<std::string> lines;
  {
    std::string cur;
    for (char c : text) {
      if (c == '\n') {
        lines.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    lines.push_back(cur);
  }

  std::vector<CheckVerdict> out;
  out.reserve(checks.size());
  for (const auto& check : checks) {
    CheckVerdict v;
    v.check_id = check.check_id;
    v.verdict = Verdict::unparseable;
    const std::string id_lo = detail::lower(check.check_id);
    bool found = false;
    for (const auto& raw : lines) {
      const std::string line = detail::strip_bullet(raw);
      const std::string lo = detail::lower(line);
      if (lo.rfind(id_lo, 0) != 0) continue;
      std::size_t p = id_lo.size();
      if (p < lo.size() && detail::is_word_char(lo[p])) continue;
      while (p < line.size() && (line[p] == ' ' || line[p] == '\t')) ++p;
      if (p >= line.size() || line[p] != ':') continue;
      ++p;
      std::string rest = detail::trim(line.substr(p));
      auto m = detail::match_verdict_prefix(rest, synonyms);
      if (!m) break;  // line present but verdict token malformed
      v.verdict = m->first;
      std::string just = rest.substr(m->second);
      // Skip the separator between verdict and justification.
      std::size_t q = 0;
      while (q < just.size() &&
             (just[q] == ' ' || just[q] == '-' || just[q] == ':' ||
              just[q] == ',' || just[q] == '.' || just[q] == ';'))
        ++q;
      if (just.compare(q, 3, "\xE2\x80\x94") == 0) q += 3;  // em dash
      v.justification = detail::trim(just.substr(q));
      found = true;
      break;
    }
    if (!found && v.verdict == Verdict::unparseable && log)
      log->add(log_context, "no parseable line for check " + check.check_id);
    v.binary = binarize(v.verdict);
    out.push_back(std::move(v));
  }
  return out;
}

/// Extracts a final verdict plus a confidence in [0,1]. A bare verdict
/// defaults to confidence 1.0 (yes) or 0.0 (no); nothing parseable yields
/// (unparseable, 0.0).
inline ScalarJudgment parse_scalar_judgment(
    const std::string& text, const SynonymTable& synonyms = default_synonyms(),
    ParseFailureLog* log = nullptr, const std::string& log_context = "") {
  ScalarJudgment out;
  auto tok = detail::find_verdict_token(text, synonyms);
  if (tok) {
    // A scalar judgment is binary; uncertainty counts against satisfaction.
    out.verdict = tok->first == Verdict::yes ? Verdict::yes : Verdict::no;
  }

  const std::string lo = detail::lower(text);
  const std::size_t kw = detail::last_keyword_pos(lo);
  std::optional<double> num;
  if (kw != std::string::npos) num = detail::first_number_after(text, kw);
  if (!num) num = detail::first_number_after(text, 0);

  if (!tok && !num) {
    if (log) log->add(log_context, text.substr(0, 200));
    return out;  // (unparseable, 0.0)
  }
  if (num) {
    out.confidence = std::clamp(*num, 0.0, 1.0);
  } else {
    out.confidence = out.verdict == Verdict::yes ? 1.0 : 0.0;
  }
  if (!tok) out.verdict = out.confidence > 0.5 ? Verdict::yes : Verdict::no;
  return out;
}

/// Extracts a single aggregation score in [0,1]; unparseable text yields 0.0
/// with a logged failure.
inline double parse_agg_score(const std::string& text,
                              ParseFailureLog* log = nullptr,
                              const std::string& log_context = "") {
  const std::string lo = detail::lower(text);
  const std::size_t kw = detail::last_keyword_pos(lo);
  std::optional<double> num;
  if (kw != std::string::npos) num = detail::first_number_after(text, kw);
  if (!num) num = detail::first_number_after(text, 0);
  if (!num) {
    if (log) log->add(log_context, text.substr(0, 200));
    return 0.0;
  }
  return std::clamp(*num, 0.0, 1.0);
}

}  // namespace soc
