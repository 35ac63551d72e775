#pragma once

/**
 * @file runner.hpp
 * @brief Experiment planning and execution over the (model x method x
 *        criterion x frame x run) matrix, with bounded concurrency, a
 *        resumable cache, per-cell error isolation, and audit traces.
 *
 * Results are deterministic for deterministic backends: cells are collected
 * in coordinate order regardless of scheduling, and no wall-clock data enters
 * the run directory outside the response cache.
 */

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "soc/aggregation.hpp"
#include "soc/backend.hpp"
#include "soc/dataset.hpp"
#include "soc/digest.hpp"
#include "soc/metrics.hpp"
#include "soc/parsing.hpp"
#include "soc/prompting.hpp"
#include "soc/registry.hpp"

namespace soc {

struct ModelSpec {
  std::string name;
  BackendKind kind = BackendKind::oracle;
  WireDialect dialect = WireDialect::chat_completions;
  std::string endpoint;
  double temperature = 0.1;
  int max_output_tokens = 1024;
};

struct Cell {
  std::string model;
  Method method;
  int criterion_id = 0;
  std::string frame_id;
  int run_index = 1;

  std::string id() const {
    return model + "__" + method.id() + "__C" + std::to_string(criterion_id) +
           "__" + frame_id + "__r" + std::to_string(run_index);
  }

  auto key() const {
    return std::tie(model, method, criterion_id, frame_id, run_index);
  }
};

struct TraceVerdict {
  std::string check_id;
  std::string verdict;
  std::string justification;
  int binary = 0;
  double weight = 0.0;
};

struct TaskResult {
  Cell cell;
  double score = 0.0;
  int prediction = 0;
  double decision_threshold = 0.5;
  std::vector<TraceVerdict> verdicts;  // empty for baselines
  std::string scalar_verdict;          // baselines only
  std::vector<std::string> cache_keys;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  int cached_calls = 0;
  std::string error;  // empty = ok
};

struct RunPlanInput {
  CheckRegistry registry;
  std::vector<FrameRecord> frames;
  std::vector<GroundTruth> labels;
  ExemplarSet exemplars;
  std::vector<ModelSpec> models;
  std::vector<Method> methods;
  int run_count = 3;
  double fraction = 1.0;
  std::uint64_t seed = 0;
  std::string dataset_digest;
  std::string exemplar_digest;
  std::string registry_digest;
  std::map<std::string, std::string> template_digests;
};

struct RunPlan {
  nlohmann::json manifest;
  std::vector<FrameRecord> eval_frames;
  std::vector<GroundTruth> eval_labels;
  std::vector<Cell> cells;
};

/// Enumerates every cell of the experiment matrix and freezes all input
/// digests into the manifest. The manifest fully determines the cache
/// keyspace of the run.
inline RunPlan plan_runs(const RunPlanInput& in) {
  if (auto report = validate_registry(in.registry); !report.empty())
    throw RunnerError("invalid registry: " + report.front());
  if (auto report = validate_exemplar_combos(in.exemplars); !report.empty())
    throw RunnerError("invalid exemplar set: " + report.front());
  if (in.run_count < 1) throw RunnerError("run_count must be >= 1");

  RunPlan plan;
  plan.eval_frames = sample_eval_split(in.frames, in.fraction, in.seed);
  std::map<std::string, const GroundTruth*> by_id;
  for (const auto& g : in.labels) by_id[g.frame_id] = &g;
  for (const auto& f : plan.eval_frames) {
    auto it = by_id.find(f.frame_id);
    if (it == by_id.end())
      throw RunnerError("frame without labels: " + f.frame_id);
    plan.eval_labels.push_back(*it->second);
  }

  for (const auto& model : in.models)
    for (const auto& method : in.methods)
      for (const auto& crit : in.registry.criteria)
        for (const auto& frame : plan.eval_frames)
          for (int run = 1; run <= in.run_count; ++run)
            plan.cells.push_back(
                {model.name, method, crit.criterion_id, frame.frame_id, run});
  std::sort(plan.cells.begin(), plan.cells.end(),
            [](const Cell& a, const Cell& b) { return a.key() < b.key(); });

  nlohmann::json frames = nlohmann::json::array();
  for (std::size_t i = 0; i < plan.eval_frames.size(); ++i) {
    const auto& f = plan.eval_frames[i];
    const auto& g = plan.eval_labels[i];
    frames.push_back({{"frame_id", f.frame_id},
                      {"image_ref", f.image_ref},
                      {"split", f.split},
                      {"labels", {g.labels[0], g.labels[1], g.labels[2]}}});
  }
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : in.models)
    models.push_back({{"name", m.name},
                      {"backend_kind", to_string(m.kind)},
                      {"endpoint", m.endpoint},
                      {"temperature", m.temperature},
                      {"max_output_tokens", m.max_output_tokens}});
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& m : in.methods) methods.push_back(m.id());
  nlohmann::json criteria = nlohmann::json::array();
  for (const auto& c : in.registry.criteria) criteria.push_back(c.criterion_id);

  plan.manifest = {
      {"registry_version", in.registry.version},
      {"registry_digest", in.registry_digest},
      {"dataset_digest", in.dataset_digest},
      {"exemplar_digest", in.exemplar_digest},
      {"template_digests", in.template_digests},
      {"models", models},
      {"methods", methods},
      {"criteria", criteria},
      {"run_count", in.run_count},
      {"fraction", in.fraction},
      {"seed", in.seed},
      {"n_cells", plan.cells.size()},
      {"frames", frames},
  };
  return plan;
}

// ---------------------------------------------------------------------------
// Execution

struct RunnerContext {
  CheckRegistry registry;
  ExemplarSet exemplars;
  PromptContext prompts;
  // One configured backend per model name (already wrapped in retry/rate
  // limiting as desired by the caller).
  std::map<std::string, std::shared_ptr<ModelBackend>> backends;
  std::map<std::string, ModelSpec> model_specs;
  std::shared_ptr<ResponseCache> cache;
  int concurrency = 8;
};

namespace detail {

struct CellOutcome {
  TaskResult result;
  std::vector<ParseFailureLog::Entry> parse_failures;
};

inline ModelConfig config_for(const ModelSpec& spec, int run_index) {
  ModelConfig c;
  c.backend_kind = spec.kind;
  c.endpoint = spec.endpoint;
  c.dialect = spec.dialect;
  c.model_name = spec.name;
  c.temperature = spec.temperature;
  c.max_output_tokens = spec.max_output_tokens;
  c.run_index = run_index;
  return c;
}

/// Completes one payload through the cache: on resume, an existing entry is
/// returned without touching the backend; otherwise the backend is called and
/// the entry (over)written.
inline ModelResponse cached_complete(RunnerContext& ctx, ModelBackend& backend,
                                     const PromptPayload& payload,
                                     const ModelConfig& config, bool resume,
                                     TaskResult& result) {
  const std::string key = cache_key(payload, config);
  result.cache_keys.push_back(key);
  if (resume && ctx.cache) {
    if (auto hit = ctx.cache->lookup(key)) {
      ++result.cached_calls;
      result.input_tokens += hit->input_tokens;
      result.output_tokens += hit->output_tokens;
      return *hit;
    }
  }
  ModelResponse r = backend.complete(payload, config);
  if (ctx.cache) ctx.cache->store(key, r);
  result.input_tokens += r.input_tokens;
  result.output_tokens += r.output_tokens;
  return r;
}

inline CellOutcome execute_cell(RunnerContext& ctx, const Cell& cell,
                                const FrameRecord& frame, bool resume) {
  CellOutcome out;
  out.result.cell = cell;
  ParseFailureLog log;
  const std::string log_context = cell.id();
  try {
    const Criterion* crit = ctx.registry.find(cell.criterion_id);
    if (!crit)
      throw RunnerError("unknown criterion " +
                        std::to_string(cell.criterion_id));
    out.result.decision_threshold = crit->decision_threshold;
    auto backend_it = ctx.backends.find(cell.model);
    if (backend_it == ctx.backends.end())
      throw RunnerError("no backend for model " + cell.model);
    ModelBackend& backend = *backend_it->second;
    const ModelConfig config =
        config_for(ctx.model_specs.at(cell.model), cell.run_index);
    const ExemplarSet* fs = cell.method.few_shot ? &ctx.exemplars : nullptr;

    switch (cell.method.kind) {
      case MethodKind::direct:
      case MethodKind::cot: {
        const PromptPayload payload =
            cell.method.kind == MethodKind::direct
                ? build_direct_prompt(ctx.prompts, frame, *crit, fs)
                : build_cot_prompt(ctx.prompts, frame, *crit, fs);
        const ModelResponse r =
            cached_complete(ctx, backend, payload, config, resume, out.result);
        const ScalarJudgment s =
            parse_scalar_judgment(r.text, default_synonyms(), &log, log_context);
        out.result.score = s.confidence;
        out.result.scalar_verdict = to_string(s.verdict);
        break;
      }
      case MethodKind::subq: {
        SubqPrompts prompts = build_subq_prompts(ctx.prompts, frame, *crit, fs);
        const ModelResponse stage1 = cached_complete(
            ctx, backend, prompts.stage1, config, resume, out.result);
        const PromptPayload stage2 = prompts.stage2(stage1.text);
        const ModelResponse r =
            cached_complete(ctx, backend, stage2, config, resume, out.result);
        const ScalarJudgment s =
            parse_scalar_judgment(r.text, default_synonyms(), &log, log_context);
        out.result.score = s.confidence;
        out.result.scalar_verdict = to_string(s.verdict);
        break;
      }
      case MethodKind::sum_of_checks: {
        const PromptPayload payload =
            build_check_prompt(ctx.prompts, frame, *crit, fs);
        const ModelResponse r =
            cached_complete(ctx, backend, payload, config, resume, out.result);
        const std::vector<CheckVerdict> verdicts = parse_check_verdicts(
            r.text, crit->checks, default_synonyms(), &log, log_context);
        for (std::size_t j = 0; j < verdicts.size(); ++j)
          out.result.verdicts.push_back({verdicts[j].check_id,
                                         to_string(verdicts[j].verdict),
                                         verdicts[j].justification,
                                         verdicts[j].binary,
                                         crit->checks[j].weight});
        if (cell.method.aggregation == Aggregation::llm) {
          const PromptPayload agg = build_llm_agg_prompt(
              ctx.prompts, *crit, verdicts, frame.frame_id);
          const ModelResponse ar =
              cached_complete(ctx, backend, agg, config, resume, out.result);
          out.result.score = parse_agg_score(ar.text, &log, log_context);
        } else {
          out.result.score = aggregate(verdicts, *crit);
        }
        break;
      }
    }
    const Criterion& c = *crit;
    out.result.prediction = decide(out.result.score, c);
  } catch (const Error& e) {
    out.result.error = e.what();
  } catch (const std::exception& e) {
    out.result.error = std::string("internal: ") + e.what();
  }
  out.parse_failures = log.entries();
  return out;
}

inline std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace detail

/// Audit view of one cell: per-check verdicts, weights, the
/// weighted score against the threshold, and the final prediction.
inline std::string render_trace(const TaskResult& r) {
  std::ostringstream os;
  os << "cell: " << r.cell.id() << "\n";
  os << "method: " << r.cell.method.label() << "\n";
  if (!r.error.empty()) {
    os << "error: " << r.error << "\n";
    return os.str();
  }
  if (!r.verdicts.empty()) {
    os << "checks:\n";
    for (const auto& v : r.verdicts) {
      os << "  " << v.check_id << "  verdict=" << v.verdict
         << "  binary=" << v.binary << "  weight="
         << detail::format_number(v.weight);
      if (!v.justification.empty()) os << "  | " << v.justification;
      os << "\n";
    }
    os << "weighted score: " << detail::format_number(r.score) << "\n";
  } else {
    os << "verdict: " << r.scalar_verdict << "\n";
    os << "confidence: " << detail::format_number(r.score) << "\n";
  }
  os << detail::format_number(r.score)
     << (r.prediction ? " > " : " <= ")
     << detail::format_number(r.decision_threshold) << " => "
     << (r.prediction ? "satisfied" : "not satisfied") << "\n";
  return os.str();
}

inline nlohmann::json to_json(const TaskResult& r) {
  nlohmann::json verdicts = nlohmann::json::array();
  for (const auto& v : r.verdicts)
    verdicts.push_back({{"check_id", v.check_id},
                        {"verdict", v.verdict},
                        {"justification", v.justification},
                        {"binary", v.binary},
                        {"weight", v.weight}});
  nlohmann::json j = {
      {"model", r.cell.model},
      {"method", r.cell.method.id()},
      {"criterion_id", r.cell.criterion_id},
      {"frame_id", r.cell.frame_id},
      {"run_index", r.cell.run_index},
      {"score", r.score},
      {"prediction", r.prediction},
      {"decision_threshold", r.decision_threshold},
      {"verdicts", verdicts},
      {"scalar_verdict", r.scalar_verdict},
      {"cache_keys", r.cache_keys},
      {"input_tokens", r.input_tokens},
      {"output_tokens", r.output_tokens},
  };
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

inline TaskResult task_result_from_json(const nlohmann::json& j) {
  TaskResult r;
  r.cell.model = j.at("model").get<std::string>();
  r.cell.method = *Method::from_id(j.at("method").get<std::string>());
  r.cell.criterion_id = j.at("criterion_id").get<int>();
  r.cell.frame_id = j.at("frame_id").get<std::string>();
  r.cell.run_index = j.at("run_index").get<int>();
  r.score = j.at("score").get<double>();
  r.prediction = j.at("prediction").get<int>();
  r.decision_threshold = j.at("decision_threshold").get<double>();
  for (const auto& vj : j.at("verdicts"))
    r.verdicts.push_back({vj.at("check_id").get<std::string>(),
                          vj.at("verdict").get<std::string>(),
                          vj.at("justification").get<std::string>(),
                          vj.at("binary").get<int>(),
                          vj.at("weight").get<double>()});
  r.scalar_verdict = j.value("scalar_verdict", "");
  for (const auto& k : j.at("cache_keys"))
    r.cache_keys.push_back(k.get<std::string>());
  r.input_tokens = j.value("input_tokens", std::int64_t{0});
  r.output_tokens = j.value("output_tokens", std::int64_t{0});
  r.error = j.value("error", "");
  return r;
}

/// Executes every cell exactly once. Per-cell failures become errored
/// TaskResults; the run never aborts on a cell. Output order is coordinate
/// order regardless of the concurrency ceiling. When `run_dir` is nonempty
/// the run directory (manifest.json, results/, traces/, parse_failures.log,
/// costs.json) is written.
inline std::vector<TaskResult> execute(const RunPlan& plan, RunnerContext& ctx,
                                       const std::filesystem::path& run_dir,
                                       bool resume) {
  std::map<std::string, const FrameRecord*> frames;
  for (const auto& f : plan.eval_frames) frames[f.frame_id] = &f;

  std::vector<detail::CellOutcome> outcomes(plan.cells.size());
  std::atomic<std::size_t> next{0};
  const int n_threads = std::max(1, ctx.concurrency);
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= plan.cells.size()) return;
        const Cell& cell = plan.cells[i];
        auto it = frames.find(cell.frame_id);
        if (it == frames.end()) {
          outcomes[i].result.cell = cell;
          outcomes[i].result.error = "frame not in plan: " + cell.frame_id;
          continue;
        }
        outcomes[i] = detail::execute_cell(ctx, cell, *it->second, resume);
      }
    });
  }
  for (auto& w : workers) w.join();

  std::vector<TaskResult> results;
  results.reserve(outcomes.size());
  for (auto& o : outcomes) results.push_back(std::move(o.result));

  if (!run_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(run_dir / "results");
    fs::create_directories(run_dir / "traces");
    {
      std::ofstream out(run_dir / "manifest.json");
      out << plan.manifest.dump(2) << "\n";
    }
    for (const auto& r : results) {
      {
        std::ofstream out(run_dir / "results" / (r.cell.id() + ".json"));
        out << to_json(r).dump(2) << "\n";
      }
      std::ofstream trace(run_dir / "traces" / (r.cell.id() + ".txt"));
      trace << render_trace(r);
    }
    {
      std::ofstream out(run_dir / "parse_failures.log");
      for (std::size_t i = 0; i < outcomes.size(); ++i)
        for (const auto& e : outcomes[i].parse_failures)
          out << e.context << "\t" << e.excerpt << "\n";
    }
    {
      // Token totals per (model, method).
      std::map<std::pair<std::string, std::string>,
               std::pair<std::int64_t, std::int64_t>>
          costs;
      std::map<std::pair<std::string, std::string>, int> cached;
      for (const auto& r : results) {
        auto& c = costs[{r.cell.model, r.cell.method.id()}];
        c.first += r.input_tokens;
        c.second += r.output_tokens;
        cached[{r.cell.model, r.cell.method.id()}] += r.cached_calls;
      }
      nlohmann::json j = nlohmann::json::array();
      for (const auto& [k, v] : costs)
        j.push_back({{"model", k.first},
                     {"method", k.second},
                     {"input_tokens", v.first},
                     {"output_tokens", v.second},
                     {"cached_calls", cached[k]}});
      std::ofstream out(run_dir / "costs.json");
      out << j.dump(2) << "\n";
    }
  }
  return results;
}

/// Renders the audit trace for one executed cell from the run directory.
inline std::string audit_trace(const std::filesystem::path& run_dir,
                               const std::string& model,
                               const std::string& method_id,
                               const std::string& frame_id, int criterion_id,
                               int run_index) {
  auto method = Method::from_id(method_id);
  if (!method) throw RunnerError("unknown method id: " + method_id);
  Cell cell{model, *method, criterion_id, frame_id, run_index};
  const auto path = run_dir / "results" / (cell.id() + ".json");
  if (!std::filesystem::exists(path))
    throw RunnerError("cell-not-found: " + cell.id());
  std::ifstream in(path);
  return render_trace(task_result_from_json(nlohmann::json::parse(in)));
}

}  // namespace soc
