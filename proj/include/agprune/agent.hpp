// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Agent gateway: prompt rendering, the decision schema, decision validation,
// the remote JSON-over-HTTP agent, and the deterministic offline policy.

#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "agprune/common.hpp"
#include "agprune/decision.hpp"
#include "agprune/profiler.hpp"
#include "agprune/reflection.hpp"

namespace agprune {

struct AgentContext {
  double current_sparsity = 0.0;
  double target_sparsity = 0.5;
  std::vector<LayerProfile> profiles;  // ascending z_sens
  double ppl_current = 1.0;
  double ppl_baseline = 1.0;
  std::optional<FeedbackRecord> feedback;
  std::size_t iteration = 1;
};

struct PromptDocument {
  std::string system;
  std::string user;
};

/// Identifies the prompt wording; bump whenever prompt.cpp text changes.
extern const std::string_view kPromptVersion;

PromptDocument render_prompt(const AgentContext& context);

nlohmann::json decision_schema();

enum class DecisionErrorKind { malformed_json, schema_violation, unknown_layer, empty_decisions };

std::string_view to_string(DecisionErrorKind kind);

class DecisionError : public Error {
 public:
  DecisionError(DecisionErrorKind kind, const std::string& what)
      : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  DecisionErrorKind kind() const { return kind_; }

 private:
  DecisionErrorKind kind_;
};

/// Raised when an agent cannot produce a decision (transport failure,
/// non-2xx status, or validation retries exhausted).
class AgentFailure : public Error {
 public:
  using Error::Error;
};

/// Parses and normalizes raw agent output: structural schema check, layer
/// names checked against the context's profiles, deltas clamped to
/// [kMinDelta, kMaxDelta], duplicate layers dropped (first wins).
AgentDecision validate_decision(std::string_view raw, const AgentContext& context);

struct AgentEndpointConfig {
  std::string url = "http://127.0.0.1:8080/v1/decide";
  std::string model = "default";
  double temperature = 0.5;
  double timeout_seconds = 60.0;
  int max_retries = 2;
  std::string api_key_env = "AGPRUNE_API_KEY";  // empty: no Authorization header

  void validate() const;
};

/// One request/response pair, kept verbatim for the run log.
struct AgentExchange {
  int attempt = 0;
  std::string request;
  int status = 0;  // 0 when no HTTP response was received
  std::string response;
  std::string error;
};

nlohmann::json to_json(const AgentExchange& exchange);

/// Request body for a prompt (keys sorted, so bytes are deterministic).
std::string build_request_body(const PromptDocument& prompt, const AgentEndpointConfig& endpoint);

/// POSTs {model, temperature, system, user, response_schema} to the endpoint
/// and expects a JSON body whose "content" string holds the decision. Each
/// failed attempt is retried (up to max_retries more); validation failures
/// are fed back in the next prompt. Throws AgentFailure when attempts run out.
AgentDecision llm_decide(const AgentContext& context, const AgentEndpointConfig& endpoint,
                         std::vector<AgentExchange>* transcript = nullptr);

struct HeuristicPolicy {
  std::size_t max_layers = 5;
  double max_z_grad = 0.5;
  double max_layer_sparsity = 0.9;
};

/// Stops once ρ_t ≥ ρ*. Otherwise picks up to max_layers lowest-z_sens
/// layers with z_grad ≤ max_z_grad and ρ_ℓ < max_layer_sparsity (falling
/// back to the lowest z_sens overall) and gives each
/// δ = clamp(0.5·(ρ* − ρ_t)), halved after Poor feedback.
AgentDecision heuristic_decide(const AgentContext& context, const HeuristicPolicy& policy = {});

class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string_view name() const = 0;
  /// Throws AgentFailure when no decision can be produced.
  virtual AgentDecision decide(const AgentContext& context,
                               std::vector<AgentExchange>& transcript) = 0;
};

class HeuristicAgent final : public Agent {
 public:
  explicit HeuristicAgent(HeuristicPolicy policy = {}) : policy_(policy) {}
  std::string_view name() const override { return "heuristic"; }
  AgentDecision decide(const AgentContext& context, std::vector<AgentExchange>&) override {
    return heuristic_decide(context, policy_);
  }

 private:
  HeuristicPolicy policy_;
};

class LlmAgent final : public Agent {
 public:
  explicit LlmAgent(AgentEndpointConfig endpoint) : endpoint_(std::move(endpoint)) {}
  std::string_view name() const override { return "llm"; }
  AgentDecision decide(const AgentContext& context,
                       std::vector<AgentExchange>& transcript) override {
    return llm_decide(context, endpoint_, &transcript);
  }

 private:
  AgentEndpointConfig endpoint_;
};

}  // namespace agprune
