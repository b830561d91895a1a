// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSON configuration document for the command line. Every section and key is
// optional; unknown keys are rejected.
//
//   {
//     "model":  {"vocab_size", "seq_len", "n_blocks", "d_model", "n_heads", "d_ff",
//                "rng_seed", "precision_mode"},
//     "corpus": {"source": "synthetic" | "text_file", "path", "n_samples", "seed"},
//     "run":    {"target_sparsity", "rollback_threshold", "max_iterations",
//                "gradient_cadence", "n_act", "n_grad", "n_ppl", "accounting",
//                "grouping", "split_seed", "fallback_to_heuristic",
//                "rubric": {"excellent_min_gain", "excellent_max_ppl_pct",
//                           "good_max_ppl_pct", "marginal_max_ppl_pct"}},
//     "agent":  {"mode": "heuristic" | "llm", "url", "model", "temperature",
//                "timeout_seconds", "max_retries", "api_key_env",
//                "heuristic": {"max_layers", "max_z_grad", "max_layer_sparsity"}},
//     "log_timing": false
//   }

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "agprune/agent.hpp"
#include "agprune/corpus.hpp"
#include "agprune/model.hpp"
#include "agprune/orchestrator.hpp"

namespace agprune {

enum class AgentMode { heuristic, llm };

std::string_view to_string(AgentMode mode);
AgentMode parse_agent_mode(std::string_view text);

struct CorpusConfig {
  CorpusSource source = CorpusSource::synthetic;
  std::string path;
  std::size_t n_samples = 128;
  std::uint64_t seed = 7;
};

struct CliConfig {
  ModelConfig model;
  CorpusConfig corpus;
  RunConfig run;
  AgentMode agent_mode = AgentMode::heuristic;
  AgentEndpointConfig endpoint;
  HeuristicPolicy heuristic;
  bool log_timing = false;

  /// Sets the model, corpus and split seeds together.
  void set_seed(std::uint64_t seed);
  void validate() const;
};

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CliConfig& config);
CliConfig cli_config_from_json(const nlohmann::json& j);

/// Throws ConfigError for a missing file, a parse error, or an unknown key.
CliConfig load_cli_config(const std::filesystem::path& path);

Corpus load_corpus(const CorpusConfig& corpus, const ModelConfig& model);

}  // namespace agprune
