#pragma once

/**
 * @file prompting.hpp
 * @brief Prompt payload construction for every method variant: Direct, CoT,
 *        SubQ, and Sum-of-Checks, each with or without few-shot exemplars,
 *        plus the LLM-aggregation ablation prompt.
 *
 * Builders are deterministic: identical inputs yield byte-identical payloads.
 * Template wording lives in data/templates/; the embedded copies here back
 * the defaults.
 */

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "soc/dataset.hpp"
#include "soc/errors.hpp"
#include "soc/parsing.hpp"
#include "soc/registry.hpp"

namespace soc {

enum class MethodKind { direct, cot, subq, sum_of_checks };
enum class Aggregation { weighted, llm };

struct Method {
  MethodKind kind = MethodKind::direct;
  bool few_shot = false;
  Aggregation aggregation = Aggregation::weighted;

  auto operator<=>(const Method&) const = default;

  /// Stable identifier used in file names, reports, and cache keys.
  std::string id() const {
    std::string base;
    switch (kind) {
      case MethodKind::direct: base = "direct"; break;
      case MethodKind::cot: base = "cot"; break;
      case MethodKind::subq: base = "subq"; break;
      case MethodKind::sum_of_checks:
        base = aggregation == Aggregation::llm ? "soc_llmagg" : "soc";
        break;
    }
    if (few_shot) base += "_fs";
    return base;
  }

  /// Human-readable row label for report tables.
  std::string label() const {
    switch (kind) {
      case MethodKind::direct: return few_shot ? "Direct+FS" : "Direct";
      case MethodKind::cot: return few_shot ? "CoT+FS" : "CoT";
      case MethodKind::subq: return few_shot ? "SubQ+FS" : "SubQ";
      case MethodKind::sum_of_checks:
        if (aggregation == Aggregation::llm) return "Sum-of-Checks (LLM agg.)";
        return few_shot ? "Sum-of-Checks" : "Sum-of-Checks (no FS)";
    }
    return "?";
  }

  static std::optional<Method> from_id(const std::string& id) {
    static const std::map<std::string, Method> table = {
        {"direct", {MethodKind::direct, false, Aggregation::weighted}},
        {"direct_fs", {MethodKind::direct, true, Aggregation::weighted}},
        {"cot", {MethodKind::cot, false, Aggregation::weighted}},
        {"cot_fs", {MethodKind::cot, true, Aggregation::weighted}},
        {"subq", {MethodKind::subq, false, Aggregation::weighted}},
        {"subq_fs", {MethodKind::subq, true, Aggregation::weighted}},
        {"soc", {MethodKind::sum_of_checks, false, Aggregation::weighted}},
        {"soc_fs", {MethodKind::sum_of_checks, true, Aggregation::weighted}},
        {"soc_llmagg", {MethodKind::sum_of_checks, false, Aggregation::llm}},
        {"soc_llmagg_fs", {MethodKind::sum_of_checks, true, Aggregation::llm}},
    };
    auto it = table.find(id);
    if (it == table.end()) return std::nullopt;
    return it->second;
  }
};

/// The seven-method comparison matrix: three baselines with and without
/// few-shot, plus weighted Sum-of-Checks with few-shot.
inline std::vector<Method> full_method_matrix() {
  return {
      {MethodKind::direct, false, Aggregation::weighted},
      {MethodKind::direct, true, Aggregation::weighted},
      {MethodKind::cot, false, Aggregation::weighted},
      {MethodKind::cot, true, Aggregation::weighted},
      {MethodKind::subq, false, Aggregation::weighted},
      {MethodKind::subq, true, Aggregation::weighted},
      {MethodKind::sum_of_checks, true, Aggregation::weighted},
  };
}

/// Ablation rows: checks without exemplars, LLM aggregation, and the full
/// weighted method.
inline std::vector<Method> ablation_method_matrix() {
  return {
      {MethodKind::sum_of_checks, false, Aggregation::weighted},
      {MethodKind::sum_of_checks, true, Aggregation::llm},
      {MethodKind::sum_of_checks, true, Aggregation::weighted},
  };
}

struct ImageAttachment {
  std::vector<std::uint8_t> bytes;
  std::string media_type;

  bool operator==(const ImageAttachment&) const = default;
};

struct PromptPayload {
  std::string system_text;
  std::string user_text;
  std::vector<ImageAttachment> images;
  std::string expected_output_schema;  // verdict_confidence | reasoning_verdict_confidence | subq_qa | check_lines | agg_score
  // Cell coordinates, carried for the oracle backend and audit traces.
  std::string frame_id;
  int criterion_id = 0;

  bool operator==(const PromptPayload&) const = default;
};

using ImageLoader =
    std::function<std::vector<std::uint8_t>(const std::string& image_ref)>;

inline std::string media_type_for(const std::string& image_ref) {
  auto ends_with = [&image_ref](const char* suffix) {
    const std::string s = suffix;
    return image_ref.size() >= s.size() &&
           image_ref.compare(image_ref.size() - s.size(), s.size(), s) == 0;
  };
  if (ends_with(".png")) return "image/png";
  if (ends_with(".jpg") || ends_with(".jpeg")) return "image/jpeg";
  if (ends_with(".webp")) return "image/webp";
  return "application/octet-stream";
}

inline ImageLoader file_image_loader() {
  return [](const std::string& image_ref) {
    std::ifstream in(image_ref, std::ios::binary);
    if (!in) throw FileMissingError(image_ref);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
  };
}

// ---------------------------------------------------------------------------
// Template assets

struct TemplateSet {
  std::map<std::string, std::string> texts;  // by asset name, e.g. "direct_user"

  const std::string& at(const std::string& name) const {
    auto it = texts.find(name);
    if (it == texts.end()) throw Error("missing template asset: " + name);
    return it->second;
  }
};

inline const std::map<std::string, std::string>& default_template_texts() {
  static const std::map<std::string, std::string> texts = {
      {"system",
       "You are an expert laparoscopic surgeon assessing the Critical View of "
       "Safety in a still frame from a laparoscopic cholecystectomy. Base every "
       "judgment only on visual evidence in the image. Treat ambiguity as "
       "insufficient evidence.\n"},
      {"direct_user",
       "{exemplar_block}Criterion: {criterion_statement}\n\n"
       "Assess whether the criterion is satisfied in the final image.\n"
       "Answer on one line in exactly this format:\n"
       "verdict: <yes|no>, confidence: <number between 0.0 and 1.0 that the "
       "criterion is satisfied>\n"},
      {"cot_user",
       "{exemplar_block}Criterion: {criterion_statement}\n\n"
       "Assess whether the criterion is satisfied in the final image. Reason "
       "step by step about the visual evidence before answering.\n"
       "End with one line in exactly this format:\n"
       "verdict: <yes|no>, confidence: <number between 0.0 and 1.0 that the "
       "criterion is satisfied>\n"},
      {"subq_stage1_user",
       "{exemplar_block}Criterion: {criterion_statement}\n\n"
       "Before deciding, generate the sub-questions you would need to answer "
       "about the final image to assess this criterion, and answer each one "
       "from the image.\n"
       "Write each pair as:\nQ: <sub-question>\nA: <answer>\n"},
      {"subq_stage2_user",
       "Criterion: {criterion_statement}\n\n"
       "You previously answered these sub-questions about the image:\n"
       "{qa_pairs}\n\n"
       "Using those answers, assess whether the criterion is satisfied.\n"
       "Answer on one line in exactly this format:\n"
       "verdict: <yes|no>, confidence: <number between 0.0 and 1.0 that the "
       "criterion is satisfied>\n"},
      {"check_user",
       "{exemplar_block}Criterion: {criterion_statement}\n\n"
       "Evaluate each verification check against the final image:\n"
       "{check_list}\n"
       "Answer with exactly one line per check, in the order listed, in this "
       "format:\n"
       "<check_id>: <yes|no|uncertain> - <one-sentence justification>\n"},
      {"llm_agg_user",
       "Criterion: {criterion_statement}\n\n"
       "The following verification checks were evaluated against a "
       "laparoscopic frame:\n"
       "{verdict_list}\n\n"
       "Considering these check results, rate how strongly the evidence "
       "supports the criterion being satisfied.\n"
       "Answer on one line in exactly this format:\n"
       "final score: <number between 0.0 and 1.0>\n"},
      {"exemplar_header",
       "Here are {n} labeled example images, in order, followed by the image "
       "to assess.\n\n"},
      {"exemplar_direct",
       "Example {index} (image {index}):\n"
       "verdict: {label_verdict}, confidence: {label_confidence}\n\n"},
      {"exemplar_cot",
       "Example {index} (image {index}):\n"
       "Reasoning: {reasoning}\n"
       "verdict: {label_verdict}, confidence: {label_confidence}\n\n"},
      {"exemplar_subq",
       "Example {index} (image {index}):\n"
       "{qa_pairs}"
       "verdict: {label_verdict}, confidence: {label_confidence}\n\n"},
      {"exemplar_check",
       "Example {index} (image {index}):\n"
       "{check_answers}\n"},
  };
  return texts;
}

inline TemplateSet default_templates() { return {default_template_texts()}; }

/// Loads template assets from a directory of <name>.txt files; names missing
/// from the directory fall back to the embedded defaults.
inline TemplateSet load_templates(const std::filesystem::path& dir) {
  TemplateSet set{default_template_texts()};
  if (!std::filesystem::exists(dir)) throw FileMissingError(dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    set.texts[entry.path().stem().string()] =
        std::string(std::istreambuf_iterator<char>(in),
                    std::istreambuf_iterator<char>());
  }
  return set;
}

/// Replaces each {name} placeholder; unknown placeholders are left intact.
inline std::string render_template(
    const std::string& tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto end = tmpl.find('}', i);
      if (end != std::string::npos) {
        const std::string name = tmpl.substr(i + 1, end - i - 1);
        auto it = vars.find(name);
        if (it != vars.end()) {
          out += it->second;
          i = end + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i]);
    ++i;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Builders

struct PromptContext {
  TemplateSet templates = default_templates();
  ImageLoader load_image = file_image_loader();
};

namespace detail {

inline std::string label_verdict(const Exemplar& e, const Criterion& c) {
  return e.labels[static_cast<std::size_t>(c.criterion_id - 1)] ? "yes" : "no";
}

inline std::string label_confidence(const Exemplar& e, const Criterion& c) {
  return e.labels[static_cast<std::size_t>(c.criterion_id - 1)] ? "1.0" : "0.0";
}

inline std::string check_answer_lines(const Exemplar& e, const Criterion& c) {
  std::string out;
  for (const auto& ch : c.checks) {
    const auto& a = e.check_answers.at(ch.check_id);
    out += ch.check_id + ": " + a.verdict + " - " + a.justification + "\n";
  }
  return out;
}

/// Reasoning text for CoT exemplars, composed from the exemplar's labeled
/// check justifications for the criterion.
inline std::string exemplar_reasoning(const Exemplar& e, const Criterion& c) {
  std::string out;
  for (const auto& ch : c.checks) {
    const auto& a = e.check_answers.at(ch.check_id);
    if (!out.empty()) out += " ";
    out += a.justification;
    if (!out.empty() && out.back() != '.') out += ".";
  }
  return out;
}

inline std::string exemplar_qa_pairs(const Exemplar& e, const Criterion& c) {
  std::string out;
  for (const auto& ch : c.checks) {
    const auto& a = e.check_answers.at(ch.check_id);
    out += "Q: " + ch.question + "\nA: " + a.verdict + ", " + a.justification +
           "\n";
  }
  return out;
}

inline std::string build_exemplar_block(const PromptContext& ctx,
                                        const ExemplarSet& exemplars,
                                        const Criterion& criterion,
                                        const std::string& style) {
  std::string block = render_template(
      ctx.templates.at("exemplar_header"),
      {{"n", std::to_string(exemplars.exemplars.size())}});
  int index = 1;
  for (const auto& e : exemplars.exemplars) {
    std::map<std::string, std::string> vars = {
        {"index", std::to_string(index)},
        {"label_verdict", label_verdict(e, criterion)},
        {"label_confidence", label_confidence(e, criterion)},
    };
    if (style == "exemplar_cot")
      vars["reasoning"] = exemplar_reasoning(e, criterion);
    if (style == "exemplar_subq")
      vars["qa_pairs"] = exemplar_qa_pairs(e, criterion);
    if (style == "exemplar_check")
      vars["check_answers"] = check_answer_lines(e, criterion);
    block += render_template(ctx.templates.at(style), vars);
    ++index;
  }
  return block;
}

/// Exemplar images first in exemplar order, query image last.
inline std::vector<ImageAttachment> build_images(const PromptContext& ctx,
                                                 const FrameRecord& frame,
                                                 const ExemplarSet* exemplars) {
  std::vector<ImageAttachment> images;
  if (exemplars) {
    for (const auto& e : exemplars->exemplars)
      images.push_back({ctx.load_image(e.frame.image_ref),
                        media_type_for(e.frame.image_ref)});
  }
  images.push_back({ctx.load_image(frame.image_ref),
                    media_type_for(frame.image_ref)});
  return images;
}

inline std::string check_list(const Criterion& c) {
  std::string out;
  for (const auto& ch : c.checks) out += ch.check_id + ": " + ch.question + "\n";
  return out;
}

}  // namespace detail

inline PromptPayload build_direct_prompt(const PromptContext& ctx,
                                         const FrameRecord& frame,
                                         const Criterion& criterion,
                                         const ExemplarSet* exemplars) {
  PromptPayload p;
  p.system_text = ctx.templates.at("system");
  p.user_text = render_template(
      ctx.templates.at("direct_user"),
      {{"criterion_statement", criterion.statement},
       {"exemplar_block",
        exemplars ? detail::build_exemplar_block(ctx, *exemplars, criterion,
                                                 "exemplar_direct")
                  : ""}});
  p.images = detail::build_images(ctx, frame, exemplars);
  p.expected_output_schema = "verdict_confidence";
  p.frame_id = frame.frame_id;
  p.criterion_id = criterion.criterion_id;
  return p;
}

inline PromptPayload build_cot_prompt(const PromptContext& ctx,
                                      const FrameRecord& frame,
                                      const Criterion& criterion,
                                      const ExemplarSet* exemplars) {
  PromptPayload p;
  p.system_text = ctx.templates.at("system");
  p.user_text = render_template(
      ctx.templates.at("cot_user"),
      {{"criterion_statement", criterion.statement},
       {"exemplar_block",
        exemplars ? detail::build_exemplar_block(ctx, *exemplars, criterion,
                                                 "exemplar_cot")
                  : ""}});
  p.images = detail::build_images(ctx, frame, exemplars);
  p.expected_output_schema = "reasoning_verdict_confidence";
  p.frame_id = frame.frame_id;
  p.criterion_id = criterion.criterion_id;
  return p;
}

/// Stage-2 template: call with the stage-1 answer text to get the final
/// payload. Stage 2 reuses the stage-1 images (the query frame stays in
/// context for the final decision).
struct SubqPrompts {
  PromptPayload stage1;
  std::function<PromptPayload(const std::string& stage1_answer)> stage2;
};

inline SubqPrompts build_subq_prompts(const PromptContext& ctx,
                                      const FrameRecord& frame,
                                      const Criterion& criterion,
                                      const ExemplarSet* exemplars) {
  SubqPrompts out;
  out.stage1.system_text = ctx.templates.at("system");
  out.stage1.user_text = render_template(
      ctx.templates.at("subq_stage1_user"),
      {{"criterion_statement", criterion.statement},
       {"exemplar_block",
        exemplars ? detail::build_exemplar_block(ctx, *exemplars, criterion,
                                                 "exemplar_subq")
                  : ""}});
  out.stage1.images = detail::build_images(ctx, frame, exemplars);
  out.stage1.expected_output_schema = "subq_qa";
  out.stage1.frame_id = frame.frame_id;
  out.stage1.criterion_id = criterion.criterion_id;

  const std::string stage2_tmpl = ctx.templates.at("subq_stage2_user");
  const std::string system_text = out.stage1.system_text;
  ImageAttachment query = out.stage1.images.back();
  const std::string statement = criterion.statement;
  const std::string frame_id = frame.frame_id;
  const int criterion_id = criterion.criterion_id;
  out.stage2 = [stage2_tmpl, system_text, query, statement, frame_id,
                criterion_id](const std::string& stage1_answer) {
    PromptPayload p;
    p.system_text = system_text;
    p.user_text = render_template(stage2_tmpl,
                                  {{"criterion_statement", statement},
                                   {"qa_pairs", stage1_answer}});
    p.images = {query};
    p.expected_output_schema = "verdict_confidence";
    p.frame_id = frame_id;
    p.criterion_id = criterion_id;
    return p;
  };
  return out;
}

/// One payload presenting all checks of the criterion, requesting one verdict
/// line per check.
inline PromptPayload build_check_prompt(const PromptContext& ctx,
                                        const FrameRecord& frame,
                                        const Criterion& criterion,
                                        const ExemplarSet* exemplars) {
  PromptPayload p;
  p.system_text = ctx.templates.at("system");
  p.user_text = render_template(
      ctx.templates.at("check_user"),
      {{"criterion_statement", criterion.statement},
       {"check_list", detail::check_list(criterion)},
       {"exemplar_block",
        exemplars ? detail::build_exemplar_block(ctx, *exemplars, criterion,
                                                 "exemplar_check")
                  : ""}});
  p.images = detail::build_images(ctx, frame, exemplars);
  p.expected_output_schema = "check_lines";
  p.frame_id = frame.frame_id;
  p.criterion_id = criterion.criterion_id;
  return p;
}

/// Text-only payload for the LLM-aggregation ablation.
inline PromptPayload build_llm_agg_prompt(
    const PromptContext& ctx, const Criterion& criterion,
    const std::vector<CheckVerdict>& verdicts, const std::string& frame_id) {
  std::string list;
  for (const auto& v : verdicts) {
    const Check* check = nullptr;
    for (const auto& ch : criterion.checks)
      if (ch.check_id == v.check_id) check = &ch;
    list += v.check_id + " (" + (check ? check->question : "") + "): " +
            to_string(v.verdict) + " - " +
            (v.justification.empty() ? "(no justification)" : v.justification) +
            "\n";
  }
  PromptPayload p;
  p.system_text = ctx.templates.at("system");
  p.user_text = render_template(ctx.templates.at("llm_agg_user"),
                                {{"criterion_statement", criterion.statement},
                                 {"verdict_list", list}});
  p.expected_output_schema = "agg_score";
  p.frame_id = frame_id;
  p.criterion_id = criterion.criterion_id;
  return p;
}

}  // namespace soc
