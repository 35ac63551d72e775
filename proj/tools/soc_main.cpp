// Command-line entry points: validate | run | report | trace.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "soc/backend.hpp"
#include "soc/dataset.hpp"
#include "soc/digest.hpp"
#include "soc/parsing.hpp"
#include "soc/prompting.hpp"
#include "soc/registry.hpp"
#include "soc/registry_data.hpp"
#include "soc/remote_backend.hpp"
#include "soc/report.hpp"
#include "soc/runner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct AppConfig {
  fs::path config_dir;
  std::optional<fs::path> registry_path;
  fs::path manifest_path;
  fs::path exemplars_path;
  std::optional<fs::path> templates_dir;
  fs::path cache_dir = "cache";
  std::optional<fs::path> oracle_ruleset_path;
  std::string mock_response;
  std::vector<std::string> method_ids;
  std::vector<soc::ModelSpec> models;
  int run_count = 3;
  double fraction = 1.0;
  std::uint64_t seed = 0;
  int concurrency = 8;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

AppConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw soc::FileMissingError(path.string());
  std::ifstream in(path);
  json j = json::parse(in);
  AppConfig cfg;
  cfg.config_dir = path.parent_path();
  if (j.contains("registry") && !j["registry"].get<std::string>().empty())
    cfg.registry_path = resolve(cfg.config_dir, j["registry"]);
  cfg.manifest_path = resolve(cfg.config_dir, j.at("manifest"));
  cfg.exemplars_path = resolve(cfg.config_dir, j.at("exemplars"));
  if (j.contains("templates_dir"))
    cfg.templates_dir = resolve(cfg.config_dir, j["templates_dir"]);
  if (j.contains("cache_dir"))
    cfg.cache_dir = resolve(cfg.config_dir, j["cache_dir"]);
  if (j.contains("oracle_ruleset"))
    cfg.oracle_ruleset_path = resolve(cfg.config_dir, j["oracle_ruleset"]);
  cfg.mock_response = j.value("mock_response", "");
  if (j.contains("methods"))
    for (const auto& m : j["methods"]) cfg.method_ids.push_back(m);
  cfg.run_count = j.value("run_count", 3);
  cfg.fraction = j.value("fraction", 1.0);
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.concurrency = j.value("concurrency", 8);
  for (const auto& mj : j.at("models")) {
    soc::ModelSpec spec;
    spec.name = mj.at("name").get<std::string>();
    const std::string kind = mj.value("backend", "oracle");
    if (kind == "remote") spec.kind = soc::BackendKind::remote;
    else if (kind == "mock") spec.kind = soc::BackendKind::mock;
    else if (kind == "oracle") spec.kind = soc::BackendKind::oracle;
    else throw soc::Error("unknown backend kind: " + kind);
    const std::string dialect = mj.value("dialect", "chat_completions");
    spec.dialect = dialect == "messages" ? soc::WireDialect::messages
                                         : soc::WireDialect::chat_completions;
    spec.endpoint = mj.value("endpoint", "");
    spec.temperature = mj.value("temperature", 0.1);
    spec.max_output_tokens = mj.value("max_output_tokens", 1024);
    cfg.models.push_back(std::move(spec));
  }
  return cfg;
}

soc::CheckRegistry load_registry_for(const AppConfig& cfg) {
  return cfg.registry_path ? soc::load_registry(*cfg.registry_path)
                           : soc::default_cvs_registry();
}

std::vector<soc::Method> methods_for(const AppConfig& cfg) {
  if (cfg.method_ids.empty()) return soc::full_method_matrix();
  std::vector<soc::Method> methods;
  for (const auto& id : cfg.method_ids) {
    auto m = soc::Method::from_id(id);
    if (!m) throw soc::Error("unknown method id: " + id);
    methods.push_back(*m);
  }
  return methods;
}

soc::OracleRuleset load_ruleset(const fs::path& path) {
  if (!fs::exists(path)) throw soc::FileMissingError(path.string());
  std::ifstream in(path);
  json j = json::parse(in);
  soc::OracleRuleset ruleset;
  for (const auto& [frame_id, fj] : j.at("frames").items()) {
    if (fj.contains("checks"))
      for (const auto& [check_id, verdict] : fj["checks"].items())
        ruleset.check_verdicts[{frame_id, check_id}] =
            verdict.get<std::string>();
    if (fj.contains("confidences"))
      for (const auto& [crit, conf] : fj["confidences"].items())
        ruleset.confidences[{frame_id, std::stoi(crit)}] = conf.get<double>();
    if (fj.contains("agg_scores"))
      for (const auto& [crit, score] : fj["agg_scores"].items())
        ruleset.agg_scores[{frame_id, std::stoi(crit)}] = score.get<double>();
  }
  return ruleset;
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return soc::sha256_hex(bytes);
}

int cmd_validate(const fs::path& config_path) {
  const AppConfig cfg = load_config(config_path);
  int failures = 0;
  const auto registry = load_registry_for(cfg);
  for (const auto& v : soc::validate_registry(registry)) {
    std::cerr << "registry: " << v << "\n";
    ++failures;
  }
  try {
    auto [frames, labels] = soc::load_manifest(cfg.manifest_path);
    std::cout << "manifest: " << frames.size() << " frames, " << labels.size()
              << " labels\n";
    try {
      const auto exemplars = soc::load_exemplars(cfg.exemplars_path, registry);
      for (const auto& v : soc::validate_exemplar_combos(exemplars)) {
        std::cerr << "exemplars: " << v << "\n";
        ++failures;
      }
      std::cout << "exemplars: " << exemplars.exemplars.size()
                << " exemplars, combos ok (required {000,111,110,001})\n";
    } catch (const soc::Error& e) {
      std::cerr << "exemplars: " << e.what()
                << " (required combos {000,111,110,001})\n";
      ++failures;
    }
  } catch (const soc::Error& e) {
    std::cerr << "manifest: " << e.what() << "\n";
    ++failures;
  }
  if (failures == 0) std::cout << "all inputs valid\n";
  return failures == 0 ? 0 : 1;
}

int cmd_run(const fs::path& config_path, const fs::path& run_dir, bool resume,
            std::optional<std::string> backend_override,
            std::vector<std::string> method_override,
            std::vector<std::string> model_override,
            std::optional<double> fraction, std::optional<std::uint64_t> seed,
            std::optional<int> runs, std::optional<int> concurrency) {
  AppConfig cfg = load_config(config_path);
  if (fraction) cfg.fraction = *fraction;
  if (seed) cfg.seed = *seed;
  if (runs) cfg.run_count = *runs;
  if (concurrency) cfg.concurrency = *concurrency;
  if (!method_override.empty()) cfg.method_ids = method_override;
  if (!model_override.empty()) {
    std::vector<soc::ModelSpec> keep;
    for (const auto& m : cfg.models)
      for (const auto& name : model_override)
        if (m.name == name) keep.push_back(m);
    cfg.models = keep;
  }
  if (backend_override) {
    for (auto& m : cfg.models) {
      if (*backend_override == "remote") m.kind = soc::BackendKind::remote;
      else if (*backend_override == "mock") m.kind = soc::BackendKind::mock;
      else if (*backend_override == "oracle") m.kind = soc::BackendKind::oracle;
      else throw soc::Error("unknown backend: " + *backend_override);
    }
  }

  const auto registry = load_registry_for(cfg);
  auto [frames, labels] = soc::load_manifest(cfg.manifest_path);
  const auto exemplars = soc::load_exemplars(cfg.exemplars_path, registry);

  soc::RunPlanInput input;
  input.registry = registry;
  input.frames = frames;
  input.labels = labels;
  input.exemplars = exemplars;
  input.models = cfg.models;
  input.methods = methods_for(cfg);
  input.run_count = cfg.run_count;
  input.fraction = cfg.fraction;
  input.seed = cfg.seed;
  input.dataset_digest = file_digest(cfg.manifest_path);
  input.exemplar_digest = file_digest(cfg.exemplars_path);
  input.registry_digest =
      soc::sha256_hex(soc::to_json(registry).dump());

  soc::RunnerContext ctx;
  ctx.registry = registry;
  ctx.exemplars = exemplars;
  if (cfg.templates_dir)
    ctx.prompts.templates = soc::load_templates(*cfg.templates_dir);
  for (const auto& [name, text] : ctx.prompts.templates.texts)
    input.template_digests[name] = soc::sha256_hex(text);
  ctx.cache = std::make_shared<soc::ResponseCache>(cfg.cache_dir);
  ctx.concurrency = cfg.concurrency;

  auto limiter = std::make_shared<soc::RateLimiter>(cfg.concurrency);
  std::shared_ptr<soc::ModelBackend> oracle;
  if (cfg.oracle_ruleset_path)
    oracle = std::make_shared<soc::OracleBackend>(
        load_ruleset(*cfg.oracle_ruleset_path), registry);
  for (const auto& spec : cfg.models) {
    ctx.model_specs[spec.name] = spec;
    switch (spec.kind) {
      case soc::BackendKind::oracle:
        if (!oracle) throw soc::Error("oracle backend needs oracle_ruleset");
        ctx.backends[spec.name] = oracle;
        break;
      case soc::BackendKind::mock:
        ctx.backends[spec.name] =
            std::make_shared<soc::MockBackend>(cfg.mock_response);
        break;
      case soc::BackendKind::remote:
        ctx.backends[spec.name] = std::make_shared<soc::RetryingBackend>(
            std::make_shared<soc::RemoteBackend>(), soc::RetryPolicy{},
            limiter);
        break;
    }
  }

  const auto plan = soc::plan_runs(input);
  std::cout << "planned " << plan.cells.size() << " cells over "
            << plan.eval_frames.size() << " frames\n";
  const auto results = soc::execute(plan, ctx, run_dir, resume);
  int errors = 0;
  for (const auto& r : results)
    if (!r.error.empty()) ++errors;
  std::cout << "completed " << results.size() << " cells, " << errors
            << " errored; run directory: " << run_dir.string() << "\n";
  return 0;
}

int cmd_report(const fs::path& run_dir, const std::string& kind,
               const std::optional<fs::path>& registry_path) {
  const auto run = soc::load_run(run_dir);
  const int expected_runs = run.run_count;
  if (kind == "results") {
    const auto table = soc::compute_results_table(run);
    const std::string text = soc::render_results_text(table, expected_runs);
    const std::string csv = soc::render_results_csv(table);
    std::cout << text;
    std::ofstream(run_dir / "report_results.txt") << text;
    std::ofstream(run_dir / "report_results.csv") << csv;
  } else if (kind == "ablation") {
    const auto table = soc::compute_results_table(run);
    const std::string text = soc::render_ablation_text(table, expected_runs);
    std::cout << text;
    std::ofstream(run_dir / "report_ablation.txt") << text;
    std::ofstream(run_dir / "report_ablation.csv")
        << soc::render_results_csv(table);
  } else if (kind == "reliability") {
    const auto registry = registry_path ? soc::load_registry(*registry_path)
                                        : soc::default_cvs_registry();
    const std::string text = soc::render_reliability_text(run, registry);
    std::cout << text;
    std::ofstream(run_dir / "report_reliability.txt") << text;
  } else {
    throw soc::Error("unknown report kind: " + kind);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sum-of-Checks: structured CVS assessment with vision-language models"};
  app.require_subcommand(1);

  std::string config_path;
  auto* validate = app.add_subcommand("validate", "Validate registry, dataset, and exemplars");
  validate->add_option("config", config_path, "Config JSON")->required();

  std::string run_config, run_dir = "run";
  bool resume = false;
  std::string backend_override;
  std::vector<std::string> methods_override, models_override;
  double fraction = -1.0;
  std::int64_t seed = -1;
  int runs = -1, concurrency = -1;
  auto* run = app.add_subcommand("run", "Execute the experiment matrix");
  run->add_option("config", run_config, "Config JSON")->required();
  run->add_option("--out", run_dir, "Run directory");
  run->add_flag("--resume", resume, "Reuse cached responses");
  run->add_option("--backend", backend_override, "Override backend kind for all models");
  run->add_option("--methods", methods_override, "Method ids to run");
  run->add_option("--models", models_override, "Model names to run");
  run->add_option("--fraction", fraction, "Evaluation split fraction");
  run->add_option("--seed", seed, "Split sampling seed");
  run->add_option("--runs", runs, "Repeat count");
  run->add_option("--concurrency", concurrency, "In-flight request ceiling");

  std::string report_dir, report_kind = "results", report_registry;
  auto* report = app.add_subcommand("report", "Render tables from a run directory");
  report->add_option("run_dir", report_dir, "Run directory")->required();
  report->add_option("--kind", report_kind, "results | ablation | reliability");
  report->add_option("--registry", report_registry, "Registry JSON for reliability grouping");

  std::string trace_dir, trace_frame, trace_method = "soc_fs", trace_model;
  int trace_criterion = 1, trace_run = 1;
  auto* trace = app.add_subcommand("trace", "Print the audit trace of one cell");
  trace->add_option("run_dir", trace_dir, "Run directory")->required();
  trace->add_option("--frame", trace_frame, "Frame id")->required();
  trace->add_option("--criterion", trace_criterion, "Criterion id")->required();
  trace->add_option("--method", trace_method, "Method id");
  trace->add_option("--model", trace_model, "Model name")->required();
  trace->add_option("--run", trace_run, "Run index");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return cmd_validate(config_path);
    if (*run)
      return cmd_run(run_config, run_dir, resume,
                     backend_override.empty()
                         ? std::nullopt
                         : std::optional<std::string>(backend_override),
                     methods_override, models_override,
                     fraction < 0 ? std::nullopt : std::optional<double>(fraction),
                     seed < 0 ? std::nullopt
                              : std::optional<std::uint64_t>(
                                    static_cast<std::uint64_t>(seed)),
                     runs < 0 ? std::nullopt : std::optional<int>(runs),
                     concurrency < 0 ? std::nullopt
                                     : std::optional<int>(concurrency));
    if (*report)
      return cmd_report(report_dir, report_kind,
                        report_registry.empty()
                            ? std::nullopt
                            : std::optional<fs::path>(report_registry));
    if (*trace) {
      std::cout << soc::audit_trace(trace_dir, trace_model, trace_method,
                                    trace_frame, trace_criterion, trace_run);
      return 0;
    }
  } catch (const soc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
