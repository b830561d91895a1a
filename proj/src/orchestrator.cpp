// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "agprune/orchestrator.hpp"

#include <chrono>
#include <cmath>
#include <map>

namespace agprune {

void RunConfig::validate() const {
  if (!(target_sparsity > 0.0 && target_sparsity <= 1.0)) {
    throw ConfigError("target sparsity must lie in (0, 1]");
  }
  if (!(rollback_threshold > 0.0)) {
    throw ConfigError("rollback threshold must be positive");
  }
  if (max_iterations < 1) {
    throw ConfigError("max_iterations must be at least 1");
  }
  if (gradient_cadence < 1) {
    throw ConfigError("gradient_cadence must be at least 1");
  }
  if (n_act < 1 || n_grad < 1 || n_ppl < 1) {
    throw ConfigError("sample counts must be at least 1");
  }
}

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::target_reached: return "target_reached";
    case StopReason::agent_stop: return "agent_stop";
    case StopReason::max_iterations: return "max_iterations";
    case StopReason::agent_failure: return "agent_failure";
  }
  return "unknown";
}

bool should_rollback(double ppl_before, double ppl_after, double tau) {
  if (!(ppl_before > 0.0)) {
    throw Error("rollback check needs a positive pre-iteration perplexity");
  }
  return (ppl_after - ppl_before) / ppl_before > tau;
}

RunResult run(const RunConfig& config, ModelGraph& model, const Corpus& corpus, Agent& agent,
              const IterationObserver& observer) {
  config.validate();
  for (const auto& sample : corpus.samples) {
    if (sample.size() > model.config.seq_len) {
      throw ConfigError("corpus samples are longer than the model's seq_len");
    }
  }
  const SampleSplit split =
      make_split(corpus, config.n_act, config.n_grad, config.n_ppl, config.split_seed);
  const TokenMatrix act_batch = gather_batch(corpus, split.activation_set);
  const std::vector<TokenMatrix> ppl_batches{gather_batch(corpus, split.ppl_set)};
  std::vector<TokenMatrix> grad_batches;
  for (const auto idx : split.gradient_set) {
    grad_batches.push_back(gather_batch(corpus, std::span(&idx, 1)));
  }

  RunResult result;
  RunState& state = result.state;
  state.ppl_baseline = perplexity(model, ppl_batches);
  state.ppl_current = state.ppl_baseline;
  state.sparsity = global_sparsity(model, config.accounting);

  std::optional<GradientStats> grad_stats;
  std::optional<FeedbackRecord> feedback;
  bool stopped = false;

  for (std::size_t t = 1; t <= config.max_iterations && !stopped; ++t) {
    const auto started = std::chrono::steady_clock::now();
    state.iteration = t;
    const Checkpoint checkpoint = save_checkpoint(model, state.ppl_current, t);

    ForwardCapture capture = ForwardCapture::for_model(model);
    forward_nll(model, act_batch, &capture);
    const ActivationNorms norms = activation_norms(capture);

    const bool refresh = !grad_stats || (t - 1) % config.gradient_cadence == 0;
    if (refresh) {
      GradientAccumulator acc(model);
      for (const auto& batch : grad_batches) {
        acc.add(backward_weight_grads(model, batch));
      }
      grad_stats = acc.finish(model, t);
    }

    AgentContext context;
    context.current_sparsity = state.sparsity;
    context.target_sparsity = config.target_sparsity;
    context.profiles = build_profiles(model, norms, *grad_stats);
    context.ppl_current = state.ppl_current;
    context.ppl_baseline = state.ppl_baseline;
    context.feedback = feedback;
    context.iteration = t;

    IterationLog log;
    log.iteration = t;
    log.agent = std::string(agent.name());
    log.target_sparsity = config.target_sparsity;
    log.sparsity_before = state.sparsity;
    log.ppl_before = state.ppl_current;
    log.gradients_refreshed = refresh;
    log.profiles = context.profiles;

    AgentDecision decision;
    try {
      decision = agent.decide(context, log.exchanges);
      // Re-validate so every decision obeys the same invariants whatever its source.
      decision = validate_decision(to_json(decision).dump(), context);
    } catch (const Error& e) {
      if (!config.fallback_to_heuristic) {
        state.stop_reason = StopReason::agent_failure;
        state.failure_message = e.what();
        result.failed_exchanges = std::move(log.exchanges);
        break;
      }
      decision = heuristic_decide(context, config.fallback_policy);
      log.agent += "+heuristic_fallback";
    }
    log.decision = decision;

    if (decision.stop_pruning) {
      log.sparsity_after = log.sparsity_attempted = state.sparsity;
      log.ppl_after = log.ppl_attempted = state.ppl_current;
      state.stop_reason = StopReason::agent_stop;
      stopped = true;
    } else {
      // One score snapshot per iteration, taken before any decision is applied.
      std::map<std::string, Matrix> scores;
      for (const auto& d : decision.layer_decisions) {
        const auto idx = *model.layer_index(d.layer);
        scores.emplace(d.layer, wanda_scores(model.layers[idx].weights, norms.per_layer[idx]));
      }
      for (const auto& d : decision.layer_decisions) {
        apply_prune(model, {d.layer, d.additional_sparsity, config.grouping}, scores.at(d.layer),
                    config.accounting);
      }
      const double ppl_new = perplexity(model, ppl_batches);
      const double rho_new = global_sparsity(model, config.accounting);
      const bool rolled_back = should_rollback(state.ppl_current, ppl_new, config.rollback_threshold);

      const FeedbackRecord record = compute_feedback(decision, state.sparsity, rho_new,
                                                     state.ppl_current, ppl_new, rolled_back,
                                                     config.rubric);
      log.sparsity_attempted = rho_new;
      log.ppl_attempted = ppl_new;
      log.rolled_back = rolled_back;
      if (rolled_back) {
        restore_checkpoint(model, checkpoint);
        state.ppl_current = checkpoint.ppl;
        ++state.rollback_count;
      } else {
        state.ppl_current = ppl_new;
        state.sparsity = rho_new;
      }
      log.sparsity_after = state.sparsity;
      log.ppl_after = state.ppl_current;
      log.feedback = record;
      feedback = record;
      if (state.sparsity >= config.target_sparsity) {
        state.stop_reason = StopReason::target_reached;
        stopped = true;
      }
    }

    log.wall_time_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - started)
                           .count();
    result.logs.push_back(log);
    if (observer) {
      observer(result.logs.back(), model, checkpoint);
    }
  }
  if (!stopped && state.stop_reason != StopReason::agent_failure) {
    state.stop_reason = StopReason::max_iterations;
  }
  return result;
}

}  // namespace agprune
