// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "agprune/reflection.hpp"

#include "agprune/common.hpp"

namespace agprune {

using nlohmann::json;

json to_json(const AgentDecision& decision) {
  json layers = json::array();
  for (const auto& d : decision.layer_decisions) {
    layers.push_back({{"layer", d.layer}, {"additional_sparsity", d.additional_sparsity}});
  }
  return {{"reasoning", decision.reasoning},
          {"stop_pruning", decision.stop_pruning},
          {"layer_decisions", std::move(layers)}};
}

AgentDecision decision_from_json(const json& j) {
  AgentDecision d;
  d.reasoning = j.at("reasoning").get<std::string>();
  d.stop_pruning = j.at("stop_pruning").get<bool>();
  for (const auto& item : j.at("layer_decisions")) {
    d.layer_decisions.push_back(
        {item.at("layer").get<std::string>(), item.at("additional_sparsity").get<double>()});
  }
  return d;
}

std::string_view tier_name(AssessmentTier tier) {
  switch (tier) {
    case AssessmentTier::Excellent: return "Excellent";
    case AssessmentTier::Good: return "Good";
    case AssessmentTier::Marginal: return "Marginal";
    case AssessmentTier::Poor: return "Poor";
  }
  return "Poor";
}

std::string_view tier_message(AssessmentTier tier) {
  switch (tier) {
    case AssessmentTier::Excellent: return kExcellentMessage;
    case AssessmentTier::Good: return kGoodMessage;
    case AssessmentTier::Marginal: return kMarginalMessage;
    case AssessmentTier::Poor: return kPoorMessage;
  }
  return kPoorMessage;
}

AssessmentTier parse_tier(std::string_view name) {
  for (auto t : {AssessmentTier::Excellent, AssessmentTier::Good, AssessmentTier::Marginal,
                 AssessmentTier::Poor}) {
    if (tier_name(t) == name) {
      return t;
    }
  }
  throw Error("unknown assessment tier '" + std::string(name) + "'");
}

Assessment assess(double sparsity_gain, double ppl_change_pct, bool rolled_back,
                  const AssessmentRubric& rubric) {
  AssessmentTier tier = AssessmentTier::Poor;
  if (rolled_back) {
    tier = AssessmentTier::Poor;
  } else if (sparsity_gain >= rubric.excellent_min_gain &&
             ppl_change_pct < rubric.excellent_max_ppl_pct) {
    tier = AssessmentTier::Excellent;
  } else if (ppl_change_pct < rubric.good_max_ppl_pct) {
    tier = AssessmentTier::Good;
  } else if (ppl_change_pct < rubric.marginal_max_ppl_pct) {
    tier = AssessmentTier::Marginal;
  }
  return {tier, std::string(tier_message(tier))};
}

FeedbackRecord compute_feedback(const AgentDecision& decision, double rho_before, double rho_after,
                                double ppl_before, double ppl_after, bool rolled_back,
                                const AssessmentRubric& rubric) {
  if (!(ppl_before > 0.0)) {
    throw Error("feedback needs a positive pre-iteration perplexity");
  }
  FeedbackRecord record;
  record.prev_decision = decision;
  record.sparsity_gain = rho_after - rho_before;
  record.ppl_change_pct = (ppl_after - ppl_before) / ppl_before * 100.0;
  record.rolled_back = rolled_back;
  record.assessment = assess(record.sparsity_gain, record.ppl_change_pct, rolled_back, rubric);
  return record;
}

json to_json(const FeedbackRecord& record) {
  return {{"decision", to_json(record.prev_decision)},
          {"sparsity_gain", record.sparsity_gain},
          {"ppl_change_pct", record.ppl_change_pct},
          {"assessment", tier_name(record.assessment.tier)},
          {"assessment_message", record.assessment.message},
          {"rolled_back", record.rolled_back}};
}

FeedbackRecord feedback_from_json(const json& j) {
  FeedbackRecord record;
  record.prev_decision = decision_from_json(j.at("decision"));
  record.sparsity_gain = j.at("sparsity_gain").get<double>();
  record.ppl_change_pct = j.at("ppl_change_pct").get<double>();
  record.assessment.tier = parse_tier(j.at("assessment").get<std::string>());
  record.assessment.message = j.at("assessment_message").get<std::string>();
  record.rolled_back = j.at("rolled_back").get<bool>();
  return record;
}

}  // namespace agprune
