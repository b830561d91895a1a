// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// All agent-facing wording lives in this file.

#include <cstdio>
#include <string>

#include "agprune/agent.hpp"
#include "agprune/pruner.hpp"

namespace agprune {

const std::string_view kPromptVersion = "agprune-prompt/1";

namespace {

constexpr std::string_view kSystemPrompt =
    "You are a pruning agent that compresses a transformer language model by choosing which "
    "linear layers to sparsify next. Each iteration you receive the global sparsity, the "
    "target sparsity, the baseline and current perplexity, and one statistical profile per "
    "layer: z_sens is the z-score of the layer's weight-activation sensitivity (10th "
    "percentile of |W| times input-activation norm over active weights) and z_grad is the "
    "z-score of its mean absolute loss gradient. Negative z-scores mean below-average "
    "sensitivity and are safer to prune; positive z-scores are riskier.\n"
    "Balance the remaining gap to the target against the model's health. An iteration whose "
    "perplexity rises by more than 15% is rolled back and reported as Poor.\n"
    "When feedback from the previous iteration is provided, analyze that decision: compare "
    "the sparsity you gained with the perplexity change and the assessment, and refine your "
    "strategy (be more conservative after regressions, bolder when perplexity stays "
    "stable).\n"
    "Respond with a single JSON object that matches the provided schema and nothing else.";

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

nlohmann::json decision_schema() {
  using nlohmann::json;
  const json layer_decision = {
      {"type", "object"},
      {"properties",
       {{"layer", {{"type", "string"}}},
        {"additional_sparsity",
         {{"type", "number"}, {"minimum", kMinDelta}, {"maximum", kMaxDelta}}}}},
      {"required", {"layer", "additional_sparsity"}},
      {"additionalProperties", false}};
  return {{"type", "object"},
          {"properties",
           {{"reasoning", {{"type", "string"}}},
            {"stop_pruning", {{"type", "boolean"}}},
            {"layer_decisions", {{"type", "array"}, {"items", layer_decision}}}}},
          {"required", {"reasoning", "stop_pruning", "layer_decisions"}},
          {"additionalProperties", false}};
}

PromptDocument render_prompt(const AgentContext& context) {
  PromptDocument doc;
  doc.system = std::string(kSystemPrompt);

  std::string u;
  u += "Iteration: " + std::to_string(context.iteration) + "\n";
  u += "Current global sparsity: " + fmt("%.4f", context.current_sparsity) + "\n";
  u += "Target sparsity: " + fmt("%.4f", context.target_sparsity) + "\n";
  u += "Remaining gap: " + fmt("%.4f", context.target_sparsity - context.current_sparsity) + "\n";
  u += "Baseline perplexity: " + fmt("%.4f", context.ppl_baseline) + "\n";
  const double degradation =
      (context.ppl_current - context.ppl_baseline) / context.ppl_baseline * 100.0;
  u += "Current perplexity: " + fmt("%.4f", context.ppl_current) + " (" +
       fmt("%+.2f", degradation) + "% vs baseline)\n";

  u += "\nLayer profiles, sorted by z_sens ascending:\n";
  u += "layer | z_sens | z_grad | sparsity\n";
  for (const auto& p : context.profiles) {
    u += p.layer + " | " + fmt("%+.4f", p.z_sens) + " | " + fmt("%+.4f", p.z_grad) + " | " +
         fmt("%.4f", p.sparsity) + "\n";
  }

  if (context.feedback) {
    const auto& fb = *context.feedback;
    u += "\nFeedback from the previous iteration:\n";
    u += "- Previous reasoning: " + fb.prev_decision.reasoning + "\n";
    u += "- Previous selections:";
    if (fb.prev_decision.layer_decisions.empty()) {
      u += " none";
    }
    for (std::size_t i = 0; i < fb.prev_decision.layer_decisions.size(); ++i) {
      const auto& d = fb.prev_decision.layer_decisions[i];
      u += (i ? ", " : " ") + d.layer + " (+" + fmt("%.4f", d.additional_sparsity) + ")";
    }
    u += "\n";
    u += "- Observed sparsity gain: " + fmt("%+.4f", fb.sparsity_gain) + "\n";
    u += "- Observed perplexity change: " + fmt("%+.2f", fb.ppl_change_pct) + "%\n";
    u += std::string("- Rolled back: ") + (fb.rolled_back ? "yes" : "no") + "\n";
    u += "- Assessment: " + fb.assessment.message + "\n";
  }

  u += "\nRules:\n";
  u += "- additional_sparsity for each layer must lie in [" + fmt("%.2f", kMinDelta) + ", " +
       fmt("%.2f", kMaxDelta) + "]; it is the extra fraction of that layer's weights to zero.\n";
  u += "- Use layer names exactly as listed; list each layer at most once.\n";
  u += "- Set stop_pruning to true to end pruning (for example when further pruning would be "
       "too harmful); when it is false, layer_decisions must be non-empty.\n";
  u += "- Respond with JSON only, matching this schema:\n";
  u += decision_schema().dump() + "\n";
  doc.user = std::move(u);
  return doc;
}

}  // namespace agprune
