// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-iteration feedback for the agent: observed sparsity gain, relative
// perplexity change, and a four-tier qualitative assessment.

#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "agprune/decision.hpp"

namespace agprune {

enum class AssessmentTier { Excellent, Good, Marginal, Poor };

inline constexpr std::string_view kExcellentMessage =
    "Excellent - High sparsity gain with minimal PPL impact";
inline constexpr std::string_view kGoodMessage =
    "Good - Acceptable trade-off between sparsity gain and PPL impact";
inline constexpr std::string_view kMarginalMessage =
    "Marginal - Noticeable PPL increase for the sparsity gained";
inline constexpr std::string_view kPoorMessage =
    "Poor - Excessive PPL degradation, consider more conservative approach";

struct Assessment {
  AssessmentTier tier = AssessmentTier::Good;
  std::string message;

  friend bool operator==(const Assessment&, const Assessment&) = default;
};

/// Tier thresholds. PPL limits are percentages.
struct AssessmentRubric {
  double excellent_min_gain = 0.01;
  double excellent_max_ppl_pct = 2.0;
  double good_max_ppl_pct = 5.0;
  double marginal_max_ppl_pct = 10.0;
};

struct FeedbackRecord {
  AgentDecision prev_decision;
  double sparsity_gain = 0.0;   // ρ_after − ρ_before
  double ppl_change_pct = 0.0;  // (ppl_after − ppl_before) / ppl_before · 100
  Assessment assessment;
  bool rolled_back = false;
};

std::string_view tier_name(AssessmentTier tier);
std::string_view tier_message(AssessmentTier tier);
AssessmentTier parse_tier(std::string_view name);

/// rolled_back → Poor. Otherwise Excellent when gain ≥ excellent_min_gain and
/// change < excellent_max_ppl_pct, then Good / Marginal by the remaining
/// limits, and Poor above them.
Assessment assess(double sparsity_gain, double ppl_change_pct, bool rolled_back,
                  const AssessmentRubric& rubric = {});

/// For a rolled-back iteration pass the attempted (discarded) values so the
/// agent sees the size of the regression.
FeedbackRecord compute_feedback(const AgentDecision& decision, double rho_before, double rho_after,
                                double ppl_before, double ppl_after, bool rolled_back,
                                const AssessmentRubric& rubric = {});

nlohmann::json to_json(const FeedbackRecord& record);
FeedbackRecord feedback_from_json(const nlohmann::json& j);

}  // namespace agprune
