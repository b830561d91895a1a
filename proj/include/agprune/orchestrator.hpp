// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// The iterative loop: checkpoint, profile, ask the agent, prune, evaluate,
// roll back on excessive perplexity growth, and feed the outcome back.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agprune/agent.hpp"
#include "agprune/checkpoint.hpp"
#include "agprune/corpus.hpp"
#include "agprune/model.hpp"
#include "agprune/profiler.hpp"
#include "agprune/pruner.hpp"
#include "agprune/reflection.hpp"

namespace agprune {

struct RunConfig {
  double target_sparsity = 0.50;
  double rollback_threshold = 0.15;  // τ, relative PPL increase
  std::size_t max_iterations = 60;
  std::size_t gradient_cadence = 3;
  std::size_t n_act = 16;
  std::size_t n_grad = 8;
  std::size_t n_ppl = 32;
  SparsityAccounting accounting = SparsityAccounting::prunable_only;
  Grouping grouping = Grouping::per_output_row;
  std::uint64_t split_seed = 7;
  bool fallback_to_heuristic = false;
  HeuristicPolicy fallback_policy;
  AssessmentRubric rubric;

  void validate() const;
};

enum class StopReason { target_reached, agent_stop, max_iterations, agent_failure };

std::string_view to_string(StopReason reason);

struct RunState {
  std::size_t iteration = 0;
  double sparsity = 0.0;
  double ppl_baseline = 0.0;
  double ppl_current = 0.0;
  std::size_t rollback_count = 0;
  StopReason stop_reason = StopReason::max_iterations;
  std::string failure_message;
};

struct IterationLog {
  std::size_t iteration = 0;
  std::string agent;
  double target_sparsity = 0.0;
  double sparsity_before = 0.0;
  double sparsity_after = 0.0;      // equals sparsity_before after a rollback
  double sparsity_attempted = 0.0;  // before any rollback
  double ppl_before = 0.0;
  double ppl_after = 0.0;
  double ppl_attempted = 0.0;
  bool rolled_back = false;
  bool gradients_refreshed = false;
  std::vector<LayerProfile> profiles;
  AgentDecision decision;
  std::optional<FeedbackRecord> feedback;
  std::vector<AgentExchange> exchanges;
  double wall_time_ms = 0.0;
};

struct RunResult {
  RunState state;
  std::vector<IterationLog> logs;
  std::vector<AgentExchange> failed_exchanges;
};

/// Called once per logged iteration, after any rollback. The checkpoint is
/// the snapshot taken at the top of that iteration.
using IterationObserver =
    std::function<void(const IterationLog&, const ModelGraph&, const Checkpoint&)>;

/// true iff (ppl_after − ppl_before) / ppl_before > tau
bool should_rollback(double ppl_before, double ppl_after, double tau);

/// Runs until the global sparsity reaches the target, the agent stops, the
/// iteration budget is spent, or the agent fails. The model is pruned in
/// place; agent failures are reported through RunState rather than thrown.
RunResult run(const RunConfig& config, ModelGraph& model, const Corpus& corpus, Agent& agent,
              const IterationObserver& observer = {});

}  // namespace agprune
