#pragma once

/**
 * @file dataset.hpp
 * @brief Frame manifests, ground-truth labels, few-shot exemplar sets, and
 *        deterministic evaluation-split sampling.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "soc/digest.hpp"
#include "soc/errors.hpp"
#include "soc/registry.hpp"

namespace soc {

struct FrameRecord {
  std::string frame_id;
  std::string image_ref;
  std::string split;  // train | val | test

  bool operator==(const FrameRecord&) const = default;
};

struct GroundTruth {
  std::string frame_id;
  std::array<int, 3> labels{};  // (y1, y2, y3), each 0 or 1

  bool operator==(const GroundTruth&) const = default;
};

struct ExemplarAnswer {
  std::string verdict;  // "yes" | "no"
  std::string justification;

  bool operator==(const ExemplarAnswer&) const = default;
};

struct Exemplar {
  FrameRecord frame;
  std::array<int, 3> labels{};
  std::map<std::string, ExemplarAnswer> check_answers;  // by check_id

  bool operator==(const Exemplar&) const = default;
};

struct ExemplarSet {
  std::vector<Exemplar> exemplars;

  bool operator==(const ExemplarSet&) const = default;
};

/// The four label combinations the exemplar set must cover, as bit-strings.
inline const std::set<std::string>& required_exemplar_combos() {
  static const std::set<std::string> combos = {"000", "111", "110", "001"};
  return combos;
}

inline std::string combo_string(const std::array<int, 3>& labels) {
  std::string s;
  for (int v : labels) s.push_back(v ? '1' : '0');
  return s;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline int parse_label(const std::string& s, const std::string& where) {
  if (s == "0") return 0;
  if (s == "1") return 1;
  throw MalformedDocumentError(where + ": label '" + s + "' not in {0,1}");
}

}  // namespace detail

/// Parses a frame manifest CSV (header frame_id,image_ref,split,y1,y2,y3).
/// Labels are cross-checked against frames; duplicates are malformed.
inline std::pair<std::vector<FrameRecord>, std::vector<GroundTruth>>
load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw FileMissingError(path.string());
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line))
    throw MalformedDocumentError(path.string() + ": empty manifest");
  if (detail::split_csv_line(line) !=
      std::vector<std::string>{"frame_id", "image_ref", "split", "y1", "y2", "y3"})
    throw MalformedDocumentError(path.string() + ": bad header '" + line + "'");

  std::vector<FrameRecord> frames;
  std::vector<GroundTruth> labels;
  std::set<std::string> seen;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (fields.size() != 6)
      throw MalformedDocumentError(where + ": expected 6 fields, got " +
                                   std::to_string(fields.size()));
    FrameRecord f{fields[0], fields[1], fields[2]};
    if (f.frame_id.empty())
      throw MalformedDocumentError(where + ": empty frame_id");
    if (f.image_ref.empty())
      throw MalformedDocumentError(where + ": empty image_ref");
    if (f.split != "train" && f.split != "val" && f.split != "test")
      throw MalformedDocumentError(where + ": bad split '" + f.split + "'");
    if (!seen.insert(f.frame_id).second)
      throw MalformedDocumentError(where + ": duplicate frame_id " + f.frame_id);
    GroundTruth g;
    g.frame_id = f.frame_id;
    for (int i = 0; i < 3; ++i)
      g.labels[i] = detail::parse_label(fields[3 + i], where);
    frames.push_back(std::move(f));
    labels.push_back(std::move(g));
  }
  // The CSV carries labels inline, so dangling labels cannot arise from this
  // loader; the check still guards label lists merged from elsewhere.
  std::set<std::string> frame_ids;
  for (const auto& f : frames) frame_ids.insert(f.frame_id);
  for (const auto& g : labels)
    if (!frame_ids.count(g.frame_id))
      throw DanglingLabelError("label for unknown frame_id " + g.frame_id);
  return {std::move(frames), std::move(labels)};
}

/// Empty report iff the four label triples match {000, 111, 110, 001} exactly.
inline std::vector<std::string> validate_exemplar_combos(const ExemplarSet& set) {
  std::vector<std::string> report;
  if (set.exemplars.size() != 4)
    report.push_back("expected 4 exemplars, got " +
                     std::to_string(set.exemplars.size()));
  std::multiset<std::string> have;
  for (const auto& e : set.exemplars) have.insert(combo_string(e.labels));
  const std::set<std::string> unique(have.begin(), have.end());
  for (const auto& combo : unique)
    if (have.count(combo) > 1) report.push_back("duplicate combo " + combo);
  for (const auto& combo : required_exemplar_combos())
    if (!have.count(combo)) report.push_back("missing combo " + combo);
  for (const auto& combo : unique)
    if (!required_exemplar_combos().count(combo))
      report.push_back("unexpected combo " + combo);
  return report;
}

/// Loads the exemplar file and enforces every invariant against the registry:
/// 4 exemplars with the required label combos, each answering every check.
inline ExemplarSet load_exemplars(const std::filesystem::path& path,
                                  const CheckRegistry& registry) {
  if (!std::filesystem::exists(path)) throw FileMissingError(path.string());
  std::ifstream in(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedDocumentError(path.string() + ": " + e.what());
  }
  ExemplarSet set;
  try {
    for (const auto& ej : j.at("exemplars")) {
      Exemplar e;
      e.frame.frame_id = ej.at("frame_id").get<std::string>();
      e.frame.image_ref = ej.at("image_ref").get<std::string>();
      e.frame.split = "train";
      const auto& lj = ej.at("labels");
      for (int i = 0; i < 3; ++i) e.labels[i] = lj.at(i).get<int>();
      for (const auto& [check_id, aj] : ej.at("check_answers").items()) {
        ExemplarAnswer a{aj.at("verdict").get<std::string>(),
                         aj.at("justification").get<std::string>()};
        e.check_answers[check_id] = std::move(a);
      }
      set.exemplars.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedDocumentError(path.string() + ": " + e.what());
  }
  const auto combo_report = validate_exemplar_combos(set);
  if (!combo_report.empty()) {
    std::string msg = "bad-combo: ";
    for (const auto& r : combo_report) msg += r + "; ";
    throw ExemplarError(msg);
  }
  for (const auto& e : set.exemplars) {
    for (const auto& crit : registry.criteria) {
      for (const auto& ch : crit.checks) {
        auto it = e.check_answers.find(ch.check_id);
        if (it == e.check_answers.end())
          throw ExemplarError("missing-check-answer: exemplar " +
                              e.frame.frame_id + " lacks answer for " +
                              ch.check_id);
        if (it->second.justification.empty())
          throw ExemplarError("empty justification: exemplar " +
                              e.frame.frame_id + " check " + ch.check_id);
      }
    }
  }
  return set;
}

/// Deterministic subset of round(fraction * n) frames: frames are ranked by a
/// keyed hash of frame_id, the top fraction taken, output ordered by frame_id.
/// A pure function of the frame_id multiset, fraction, and seed.
inline std::vector<FrameRecord> sample_eval_split(
    const std::vector<FrameRecord>& frames, double fraction,
    std::uint64_t seed) {
  if (frames.empty()) throw Error("empty-input: no frames to sample");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw Error("fraction must be in (0,1]");
  const auto n = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(frames.size())));
  std::vector<FrameRecord> ranked = frames;
  std::sort(ranked.begin(), ranked.end(),
            [seed](const FrameRecord& a, const FrameRecord& b) {
              const auto ha = keyed_hash64(seed, a.frame_id);
              const auto hb = keyed_hash64(seed, b.frame_id);
              return ha != hb ? ha < hb : a.frame_id < b.frame_id;
            });
  ranked.resize(std::min(n, ranked.size()));
  std::sort(ranked.begin(), ranked.end(),
            [](const FrameRecord& a, const FrameRecord& b) {
              return a.frame_id < b.frame_id;
            });
  return ranked;
}

}  // namespace soc
