#pragma once

/**
 * @file report.hpp
 * @brief Report rendering from a run directory: the results table (mean +/-
 *        std mAP per criterion per method), the ablation table, and the
 *        per-check reliability report. Pure over the run directory contents.
 */

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "soc/errors.hpp"
#include "soc/metrics.hpp"
#include "soc/parsing.hpp"
#include "soc/prompting.hpp"
#include "soc/registry.hpp"
#include "soc/runner.hpp"

namespace soc {

struct LoadedRun {
  nlohmann::json manifest;
  std::vector<TaskResult> results;
  std::map<std::string, std::array<int, 3>> labels;  // frame_id -> (y1,y2,y3)
  int run_count = 0;
  int n_errors = 0;
};

inline LoadedRun load_run(const std::filesystem::path& run_dir) {
  namespace fs = std::filesystem;
  if (!fs::exists(run_dir / "manifest.json"))
    throw Error("missing-run: no manifest at " + run_dir.string());
  LoadedRun run;
  {
    std::ifstream in(run_dir / "manifest.json");
    run.manifest = nlohmann::json::parse(in);
  }
  run.run_count = run.manifest.value("run_count", 0);
  for (const auto& fj : run.manifest.at("frames")) {
    std::array<int, 3> labels{};
    for (int i = 0; i < 3; ++i) labels[i] = fj.at("labels").at(i).get<int>();
    run.labels[fj.at("frame_id").get<std::string>()] = labels;
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(run_dir / "results"))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    std::ifstream in(path);
    run.results.push_back(task_result_from_json(nlohmann::json::parse(in)));
    if (!run.results.back().error.empty()) ++run.n_errors;
  }
  return run;
}

struct CellStat {
  MeanStd value;        // in [0,1]
  int completed_runs = 0;
};

/// (model, method) -> per-column mAP stats; columns C1, C2, C3, Avg.
struct ResultsTable {
  std::vector<std::string> models;                       // row-block order
  std::map<std::string, std::vector<Method>> methods;    // per model
  std::map<std::pair<std::string, std::string>, std::array<CellStat, 4>> cells;
  int n_errors = 0;
};

/// AP per (model, method, criterion, run) from the stored scores; errored
/// cells are excluded from the ranking.
inline ResultsTable compute_results_table(const LoadedRun& run) {
  ResultsTable table;
  table.n_errors = run.n_errors;
  // (model, method, criterion, run) -> (scores, labels)
  std::map<std::tuple<std::string, std::string, int, int>,
           std::pair<std::vector<double>, std::vector<int>>>
      groups;
  std::set<std::string> model_seen;
  std::map<std::string, std::set<std::string>> method_seen;
  for (const auto& r : run.results) {
    if (!r.error.empty()) continue;
    auto lab = run.labels.find(r.cell.frame_id);
    if (lab == run.labels.end()) continue;
    auto& g = groups[{r.cell.model, r.cell.method.id(), r.cell.criterion_id,
                      r.cell.run_index}];
    g.first.push_back(r.score);
    g.second.push_back(
        lab->second[static_cast<std::size_t>(r.cell.criterion_id - 1)]);
    if (model_seen.insert(r.cell.model).second)
      table.models.push_back(r.cell.model);
    if (method_seen[r.cell.model].insert(r.cell.method.id()).second)
      table.methods[r.cell.model].push_back(r.cell.method);
  }

  // (model, method) -> criterion -> run -> ap
  std::map<std::pair<std::string, std::string>,
           std::map<int, std::map<int, double>>>
      aps;
  for (const auto& [key, g] : groups) {
    const auto& [model, method, criterion, run_index] = key;
    try {
      aps[{model, method}][criterion][run_index] =
          average_precision(g.first, g.second);
    } catch (const MetricError&) {
      // No positives in this slice; leave the cell empty.
    }
  }

  for (const auto& [key, per_criterion] : aps) {
    std::array<CellStat, 4> row{};
    std::map<int, double> avg_by_run;
    std::map<int, int> criteria_by_run;
    for (int c = 1; c <= 3; ++c) {
      auto it = per_criterion.find(c);
      if (it == per_criterion.end()) continue;
      std::vector<double> values;
      for (const auto& [run_index, ap] : it->second) {
        values.push_back(ap);
        avg_by_run[run_index] += ap;
        criteria_by_run[run_index]++;
      }
      row[static_cast<std::size_t>(c - 1)].completed_runs =
          static_cast<int>(values.size());
      if (values.size() >= 2)
        row[static_cast<std::size_t>(c - 1)].value = map_over_runs(values);
      else if (values.size() == 1)
        row[static_cast<std::size_t>(c - 1)].value = {values[0], 0.0};
    }
    // Per-run Avg = mean of that run's per-criterion APs, then mean +/- std
    // over runs.
    std::vector<double> avgs;
    for (const auto& [run_index, sum] : avg_by_run)
      if (criteria_by_run[run_index] == 3) avgs.push_back(sum / 3.0);
    row[3].completed_runs = static_cast<int>(avgs.size());
    if (avgs.size() >= 2)
      row[3].value = map_over_runs(avgs);
    else if (avgs.size() == 1)
      row[3].value = {avgs[0], 0.0};
    table.cells[key] = row;
  }
  return table;
}

namespace detail {

/// Percent with one decimal, rounding half away from zero.
inline std::string percent1(double fraction) {
  const double v = fraction * 100.0;
  const double r = std::floor(std::abs(v) * 10.0 + 0.5) / 10.0;
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(1);
  os << (v < 0 ? -r : r);
  return os.str();
}

inline std::string cell_text(const CellStat& s, int expected_runs) {
  if (s.completed_runs == 0) return "-";
  std::string out = percent1(s.value.mean) + "+-" + percent1(s.value.std);
  if (expected_runs > 0 && s.completed_runs < expected_runs)
    out += " (" + std::to_string(s.completed_runs) + "/" +
           std::to_string(expected_runs) + " runs)";
  return out;
}

}  // namespace detail

/// Plain-text results table: one block per model,
/// columns C1, C2, C3, Avg, best mean per column within a block marked '*'.
inline std::string render_results_text(const ResultsTable& table,
                                       int expected_runs) {
  std::ostringstream os;
  os << "Frame-level CVS assessment (mAP %, mean+-std over runs)\n";
  if (table.n_errors > 0)
    os << "note: " << table.n_errors << " errored cells excluded\n";
  os << "\n";
  for (const auto& model : table.models) {
    os << "Model: " << model << "\n";
    os << "  " << std::left << std::setw(28) << "Method" << std::setw(16)
       << "C1" << std::setw(16) << "C2" << std::setw(16) << "C3"
       << std::setw(16) << "Avg" << "\n";
    // Best mean per column within the block.
    std::array<double, 4> best{-1, -1, -1, -1};
    for (const auto& method : table.methods.at(model)) {
      const auto& row = table.cells.at({model, method.id()});
      for (int c = 0; c < 4; ++c)
        if (row[static_cast<std::size_t>(c)].completed_runs > 0)
          best[static_cast<std::size_t>(c)] =
              std::max(best[static_cast<std::size_t>(c)],
                       row[static_cast<std::size_t>(c)].value.mean);
    }
    for (const auto& method : table.methods.at(model)) {
      const auto& row = table.cells.at({model, method.id()});
      os << "  " << std::left << std::setw(28) << method.label();
      for (int c = 0; c < 4; ++c) {
        const auto& s = row[static_cast<std::size_t>(c)];
        std::string text = detail::cell_text(s, expected_runs);
        if (s.completed_runs > 0 &&
            s.value.mean == best[static_cast<std::size_t>(c)])
          text += "*";
        os << std::setw(16) << text;
      }
      os << "\n";
    }
    os << "\n";
  }
  return os.str();
}

inline std::string render_results_csv(const ResultsTable& table) {
  std::ostringstream os;
  os << "model,method,c1_mean,c1_std,c2_mean,c2_std,c3_mean,c3_std,avg_mean,avg_std\n";
  for (const auto& model : table.models) {
    for (const auto& method : table.methods.at(model)) {
      const auto& row = table.cells.at({model, method.id()});
      os << model << "," << method.id();
      for (int c = 0; c < 4; ++c) {
        const auto& s = row[static_cast<std::size_t>(c)];
        if (s.completed_runs == 0) {
          os << ",,";
        } else {
          os << "," << detail::percent1(s.value.mean) << ","
             << detail::percent1(s.value.std);
        }
      }
      os << "\n";
    }
  }
  return os.str();
}

/// Ablation table: Sum-of-Checks rows only, in no-FS / LLM-agg / weighted
/// order, one block per model that has them.
inline std::string render_ablation_text(const ResultsTable& table,
                                        int expected_runs) {
  static const std::vector<std::pair<std::string, std::string>> rows = {
      {"soc", "Sum-of-Checks (no FS)"},
      {"soc_llmagg_fs", "Sum-of-Checks (LLM agg.)"},
      {"soc_fs", "Sum-of-Checks (Weighted)"},
  };
  std::ostringstream os;
  os << "Sum-of-Checks ablation (mAP %, mean+-std over runs)\n\n";
  for (const auto& model : table.models) {
    bool any = false;
    for (const auto& [id, label] : rows)
      if (table.cells.count({model, id})) any = true;
    if (!any) continue;
    os << "Model: " << model << "\n";
    os << "  " << std::left << std::setw(28) << "Method" << std::setw(16)
       << "C1" << std::setw(16) << "C2" << std::setw(16) << "C3"
       << std::setw(16) << "Avg" << "\n";
    for (const auto& [id, label] : rows) {
      auto it = table.cells.find({model, id});
      if (it == table.cells.end()) continue;
      os << "  " << std::left << std::setw(28) << label;
      for (int c = 0; c < 4; ++c)
        os << std::setw(16)
           << detail::cell_text(it->second[static_cast<std::size_t>(c)],
                                expected_runs);
      os << "\n";
    }
    os << "\n";
  }
  return os.str();
}

/// Per-check flip rates and verdict distributions, grouped by check
/// category, from the stored Sum-of-Checks verdicts.
inline std::string render_reliability_text(const LoadedRun& run,
                                           const CheckRegistry& registry) {
  std::vector<VerdictObservation> observations;
  for (const auto& r : run.results) {
    if (!r.error.empty()) continue;
    for (const auto& v : r.verdicts) {
      Verdict verdict = Verdict::unparseable;
      if (v.verdict == "yes") verdict = Verdict::yes;
      else if (v.verdict == "no") verdict = Verdict::no;
      else if (v.verdict == "uncertain") verdict = Verdict::uncertain;
      observations.push_back(
          {r.cell.frame_id, v.check_id, r.cell.run_index, verdict});
    }
  }
  auto reliability = per_check_reliability(observations, registry);
  std::sort(reliability.begin(), reliability.end(),
            [](const CheckReliability& a, const CheckReliability& b) {
              if (a.category != b.category) return a.category < b.category;
              return a.check_id < b.check_id;
            });
  std::ostringstream os;
  os << "Per-check reliability (flip rate across runs, verdict distribution)\n";
  CheckCategory last = CheckCategory::anatomical_visibility;
  bool first = true;
  for (const auto& r : reliability) {
    if (first || r.category != last) {
      os << "\ncategory: " << to_string(r.category) << "\n";
      last = r.category;
      first = false;
    }
    os << "  " << std::left << std::setw(8) << r.check_id
       << "flip_rate=" << detail::percent1(r.flip_rate_across_runs) << "%"
       << "  yes/no/uncertain/unparseable = "
       << detail::percent1(r.verdict_distribution[0]) << "/"
       << detail::percent1(r.verdict_distribution[1]) << "/"
       << detail::percent1(r.verdict_distribution[2]) << "/"
       << detail::percent1(r.verdict_distribution[3]) << " %"
       << "  n=" << r.n_verdicts << "\n";
  }
  return os.str();
}

}  // namespace soc
