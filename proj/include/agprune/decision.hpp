// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace agprune {

struct LayerDecision {
  std::string layer;
  double additional_sparsity = 0.0;

  friend bool operator==(const LayerDecision&, const LayerDecision&) = default;
};

/// Validated agent output.
struct AgentDecision {
  std::string reasoning;
  bool stop_pruning = false;
  std::vector<LayerDecision> layer_decisions;

  friend bool operator==(const AgentDecision&, const AgentDecision&) = default;
};

nlohmann::json to_json(const AgentDecision& decision);
AgentDecision decision_from_json(const nlohmann::json& j);

}  // namespace agprune
