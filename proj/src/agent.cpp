// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "agprune/agent.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <set>

#include <httplib.h>

#include "agprune/json_schema.hpp"
#include "agprune/pruner.hpp"

namespace agprune {

namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// Models sometimes wrap JSON in a Markdown code fence.
std::string_view strip_code_fence(std::string_view s) {
  s = trim(s);
  if (s.size() >= 6 && s.starts_with("```") && s.ends_with("```")) {
    const auto newline = s.find('\n');
    if (newline != std::string_view::npos) {
      return trim(s.substr(newline + 1, s.size() - 3 - (newline + 1)));
    }
  }
  return s;
}

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw AgentFailure("agent URL '" + url + "' has no scheme");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {url, "/"};
  }
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string clip(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string_view to_string(DecisionErrorKind kind) {
  switch (kind) {
    case DecisionErrorKind::malformed_json: return "malformed_json";
    case DecisionErrorKind::schema_violation: return "schema_violation";
    case DecisionErrorKind::unknown_layer: return "unknown_layer";
    case DecisionErrorKind::empty_decisions: return "empty_decisions";
  }
  return "unknown";
}

AgentDecision validate_decision(std::string_view raw, const AgentContext& context) {
  json doc;
  try {
    doc = json::parse(strip_code_fence(raw));
  } catch (const json::exception& e) {
    throw DecisionError(DecisionErrorKind::malformed_json, e.what());
  }
  // Out-of-range deltas are clamped below rather than rejected.
  if (auto err = schema_violation(decision_schema(), doc, {.check_numeric_bounds = false})) {
    throw DecisionError(DecisionErrorKind::schema_violation, *err);
  }
  AgentDecision decision = decision_from_json(doc);

  std::set<std::string> known;
  for (const auto& p : context.profiles) {
    known.insert(p.layer);
  }
  std::set<std::string> seen;
  std::vector<LayerDecision> kept;
  for (auto& d : decision.layer_decisions) {
    if (!known.contains(d.layer)) {
      throw DecisionError(DecisionErrorKind::unknown_layer, "'" + d.layer + "' is not a prunable layer");
    }
    if (!seen.insert(d.layer).second) {
      continue;
    }
    d.additional_sparsity = std::clamp(d.additional_sparsity, kMinDelta, kMaxDelta);
    kept.push_back(std::move(d));
  }
  decision.layer_decisions = std::move(kept);
  if (!decision.stop_pruning && decision.layer_decisions.empty()) {
    throw DecisionError(DecisionErrorKind::empty_decisions,
                        "layer_decisions is empty while stop_pruning is false");
  }
  return decision;
}

void AgentEndpointConfig::validate() const {
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw ConfigError("agent temperature must lie in [0, 2]");
  }
  if (max_retries < 0) {
    throw ConfigError("agent max_retries must be >= 0");
  }
  if (!(timeout_seconds > 0.0)) {
    throw ConfigError("agent timeout must be positive");
  }
  if (url.find("://") == std::string::npos) {
    throw ConfigError("agent URL '" + url + "' has no scheme");
  }
}

json to_json(const AgentExchange& exchange) {
  return {{"attempt", exchange.attempt},
          {"request", exchange.request},
          {"status", exchange.status},
          {"response", exchange.response},
          {"error", exchange.error}};
}

std::string build_request_body(const PromptDocument& prompt, const AgentEndpointConfig& endpoint) {
  const json body = {{"model", endpoint.model},
                     {"temperature", endpoint.temperature},
                     {"system", prompt.system},
                     {"user", prompt.user},
                     {"response_schema", decision_schema()}};
  return body.dump();
}

AgentDecision llm_decide(const AgentContext& context, const AgentEndpointConfig& endpoint,
                         std::vector<AgentExchange>* transcript) {
  endpoint.validate();
  httplib::Headers headers;
  if (!endpoint.api_key_env.empty()) {
    const char* key = std::getenv(endpoint.api_key_env.c_str());
    if (!key || !*key) {
      throw AgentFailure("environment variable " + endpoint.api_key_env + " is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  const auto [origin, path] = parse_url(endpoint.url);
  httplib::Client client(origin);
  if (!client.is_valid()) {
    throw AgentFailure("cannot create an HTTP client for '" + origin + "'");
  }
  const auto secs = static_cast<time_t>(endpoint.timeout_seconds);
  const auto usecs =
      static_cast<time_t>((endpoint.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  PromptDocument prompt = render_prompt(context);
  const std::string base_user = prompt.user;
  std::string last_error;
  const int attempts = endpoint.max_retries + 1;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    AgentExchange exchange;
    exchange.attempt = attempt;
    exchange.request = build_request_body(prompt, endpoint);

    auto result = client.Post(path, headers, exchange.request, "application/json");
    if (!result) {
      exchange.error = "transport error: " + httplib::to_string(result.error());
    } else {
      exchange.status = result->status;
      exchange.response = result->body;
      if (result->status < 200 || result->status >= 300) {
        exchange.error = "HTTP status " + std::to_string(result->status);
      } else {
        try {
          json body;
          try {
            body = json::parse(result->body);
          } catch (const json::exception& e) {
            throw DecisionError(DecisionErrorKind::malformed_json,
                                std::string("response body: ") + e.what());
          }
          if (!body.is_object() || !body.contains("content") || !body["content"].is_string()) {
            throw DecisionError(DecisionErrorKind::malformed_json,
                                "response body has no string field 'content'");
          }
          AgentDecision decision =
              validate_decision(body["content"].get<std::string>(), context);
          if (transcript) {
            transcript->push_back(std::move(exchange));
          }
          return decision;
        } catch (const DecisionError& e) {
          exchange.error = e.what();
          prompt.user = base_user + "\nYour previous response was rejected (" + e.what() +
                        "). Reply again with one JSON object that satisfies the schema.\n";
        }
      }
    }
    last_error = exchange.error;
    if (transcript) {
      transcript->push_back(std::move(exchange));
    }
  }
  throw AgentFailure("agent gave no valid decision after " + std::to_string(attempts) +
                     " attempt(s): " + last_error);
}

AgentDecision heuristic_decide(const AgentContext& context, const HeuristicPolicy& policy) {
  AgentDecision decision;
  const double rho = context.current_sparsity;
  const double target = context.target_sparsity;
  if (rho >= target) {
    decision.stop_pruning = true;
    decision.reasoning = "Global sparsity " + clip(rho) + " has reached the target " +
                         clip(target) + "; stopping.";
    return decision;
  }

  auto ordered = context.profiles;
  std::stable_sort(ordered.begin(), ordered.end(), [](const LayerProfile& a, const LayerProfile& b) {
    if (a.z_sens != b.z_sens) {
      return a.z_sens < b.z_sens;
    }
    return a.layer < b.layer;
  });

  std::vector<const LayerProfile*> picked;
  for (const auto& p : ordered) {
    if (picked.size() >= policy.max_layers) {
      break;
    }
    if (p.z_grad <= policy.max_z_grad && p.sparsity < policy.max_layer_sparsity) {
      picked.push_back(&p);
    }
  }
  bool fallback = false;
  if (picked.empty()) {
    fallback = true;
    for (const auto& p : ordered) {
      if (picked.size() >= policy.max_layers) {
        break;
      }
      if (p.sparsity < 1.0) {
        picked.push_back(&p);
      }
    }
  }
  if (picked.empty()) {
    decision.stop_pruning = true;
    decision.reasoning = "No layer has active weights left to prune; stopping.";
    return decision;
  }

  double delta = std::clamp(0.5 * (target - rho), kMinDelta, kMaxDelta);
  const bool poor =
      context.feedback && context.feedback->assessment.tier == AssessmentTier::Poor;
  if (poor) {
    delta = std::max(delta / 2.0, kMinDelta);
  }

  decision.reasoning = "Gap to target is " + clip(target - rho) + ". Selecting " +
                       std::to_string(picked.size()) + " layer(s) with the lowest sensitivity " +
                       (fallback ? "z-scores (no layer passed the gradient/sparsity filter)"
                                 : "z-scores among those with low gradient impact") +
                       " at delta " + clip(delta) +
                       (poor ? ", halved after Poor feedback." : ".");
  for (const auto* p : picked) {
    decision.layer_decisions.push_back({p->layer, delta});
  }
  return decision;
}

}  // namespace agprune
