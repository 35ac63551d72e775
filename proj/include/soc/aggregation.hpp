#pragma once

/**
 * @file aggregation.hpp
 * @brief Weighted aggregation of check verdicts into criterion scores and the
 *        threshold decision rule.
 */

#include <string>
#include <vector>

#include "soc/errors.hpp"
#include "soc/parsing.hpp"
#include "soc/registry.hpp"

namespace soc {

/// Weighted average of binarized verdicts: sum_j w_j * r_j. Verdicts must
/// align one-to-one with the criterion's checks, same check_id order.
inline double aggregate(const std::vector<CheckVerdict>& verdicts,
                        const Criterion& criterion) {
  if (verdicts.size() != criterion.checks.size())
    throw AggregationError("arity-mismatch: " + std::to_string(verdicts.size()) +
                           " verdicts for " +
                           std::to_string(criterion.checks.size()) + " checks");
  double score = 0.0;
  for (std::size_t j = 0; j < verdicts.size(); ++j) {
    if (detail::lower(verdicts[j].check_id) !=
        detail::lower(criterion.checks[j].check_id))
      throw AggregationError("order-mismatch: verdict " + verdicts[j].check_id +
                             " vs check " + criterion.checks[j].check_id +
                             " at position " + std::to_string(j));
    score += criterion.checks[j].weight * verdicts[j].binary;
  }
  return score;
}

/// 1 iff score strictly exceeds the criterion threshold; a tie predicts 0.
inline int decide(double score, const Criterion& criterion) {
  return score > criterion.decision_threshold ? 1 : 0;
}

}  // namespace soc

#include "soc/backend.hpp"
#include "soc/prompting.hpp"

namespace soc {

/// Ablation route: the aggregation prompt is sent to the backend and the
/// returned score parsed. Verdicts must cover the criterion's checks.
inline double llm_aggregate(const std::vector<CheckVerdict>& verdicts,
                            const Criterion& criterion,
                            ModelBackend& backend, const ModelConfig& config,
                            const PromptContext& ctx,
                            const std::string& frame_id,
                            ParseFailureLog* log = nullptr) {
  if (verdicts.size() != criterion.checks.size())
    throw AggregationError("arity-mismatch: llm_aggregate needs one verdict per check");
  const PromptPayload payload =
      build_llm_agg_prompt(ctx, criterion, verdicts, frame_id);
  const ModelResponse response = backend.complete(payload, config);
  return parse_agg_score(response.text, log,
                         frame_id + "/C" + std::to_string(criterion.criterion_id) +
                             "/llm_agg");
}

}  // namespace soc
