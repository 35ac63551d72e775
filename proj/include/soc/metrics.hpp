#pragma once

/**
 * @file metrics.hpp
 * @brief Average precision with tie grouping, mean/std aggregation over runs,
 *        and per-check reliability statistics.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "soc/errors.hpp"
#include "soc/parsing.hpp"
#include "soc/prompting.hpp"
#include "soc/registry.hpp"

namespace soc {

struct APResult {
  int criterion_id = 0;
  Method method;
  int run_index = 1;
  double ap = 0.0;
  int n_frames = 0;
  int n_positives = 0;
};

struct CheckReliability {
  std::string check_id;
  CheckCategory category = CheckCategory::anatomical_visibility;
  double flip_rate_across_runs = 0.0;
  // Proportions over {yes, no, uncertain, unparseable}; sums to 1.
  std::array<double, 4> verdict_distribution{};
  std::optional<double> accuracy_vs_labels;
  int n_verdicts = 0;
};

/// AP over the precision-recall step function at descending score thresholds.
/// Equal scores enter together at one threshold: AP = sum_g (R_g - R_{g-1}) * P_g.
inline double average_precision(const std::vector<double>& scores,
                                const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw MetricError("length-mismatch: " + std::to_string(scores.size()) +
                      " scores vs " + std::to_string(labels.size()) + " labels");
  const int total_pos = std::accumulate(labels.begin(), labels.end(), 0);
  if (total_pos == 0) throw MetricError("no-positives");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&scores](auto a, auto b) {
    return scores[a] > scores[b];
  });

  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t n_seen = 0;
  int tp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += labels[order[j]];
      ++j;
    }
    n_seen = j;
    const double precision = static_cast<double>(tp) / n_seen;
    const double recall = static_cast<double>(tp) / total_pos;
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, divisor n-1
};

/// Mean and sample std over the per-run values of one (method, criterion)
/// group. Requires at least two runs.
inline MeanStd map_over_runs(const std::vector<double>& run_values) {
  if (run_values.size() < 2)
    throw MetricError("insufficient-runs: need >= 2, got " +
                      std::to_string(run_values.size()));
  const double n = static_cast<double>(run_values.size());
  const double mean =
      std::accumulate(run_values.begin(), run_values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : run_values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

/// One observed verdict for reliability bookkeeping.
struct VerdictObservation {
  std::string frame_id;
  std::string check_id;
  int run_index = 1;
  Verdict verdict = Verdict::unparseable;
};

/// Flip rate, verdict distribution, and optional accuracy per check.
/// flip_rate = fraction of frames whose binary verdict differs between any
/// two runs. `check_labels`, when given, maps (frame_id, check_id) to the
/// expected binary answer (available for exemplar frames).
inline std::vector<CheckReliability> per_check_reliability(
    const std::vector<VerdictObservation>& observations,
    const CheckRegistry& registry,
    const std::map<std::pair<std::string, std::string>, int>* check_labels =
        nullptr) {
  std::map<std::string, const Check*> checks;
  for (const auto& c : registry.criteria)
    for (const auto& ch : c.checks) checks[ch.check_id] = &ch;

  // (check_id, frame_id) -> binaries per run; check_id -> verdict counts.
  std::map<std::string, std::map<std::string, std::set<int>>> binaries;
  std::map<std::string, std::array<int, 4>> counts;
  std::map<std::string, std::pair<int, int>> acc;  // correct, labeled
  for (const auto& o : observations) {
    binaries[o.check_id][o.frame_id].insert(binarize(o.verdict));
    counts[o.check_id][static_cast<std::size_t>(o.verdict)]++;
    if (check_labels) {
      auto it = check_labels->find({o.frame_id, o.check_id});
      if (it != check_labels->end()) {
        acc[o.check_id].second++;
        if (binarize(o.verdict) == it->second) acc[o.check_id].first++;
      }
    }
  }

  std::vector<CheckReliability> out;
  for (const auto& [check_id, per_frame] : binaries) {
    CheckReliability r;
    r.check_id = check_id;
    if (auto it = checks.find(check_id); it != checks.end())
      r.category = it->second->category;
    int flips = 0;
    for (const auto& [frame_id, distinct] : per_frame)
      if (distinct.size() > 1) ++flips;
    r.flip_rate_across_runs =
        per_frame.empty() ? 0.0
                          : static_cast<double>(flips) / per_frame.size();
    const auto& c = counts[check_id];
    const int n = c[0] + c[1] + c[2] + c[3];
    r.n_verdicts = n;
    for (std::size_t k = 0; k < 4; ++k)
      r.verdict_distribution[k] = n ? static_cast<double>(c[k]) / n : 0.0;
    if (check_labels) {
      auto it = acc.find(check_id);
      if (it != acc.end() && it->second.second > 0)
        r.accuracy_vs_labels = static_cast<double>(it->second.first) /
                               it->second.second;
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace soc
