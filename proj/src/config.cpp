// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "agprune/config.hpp"

#include <fstream>
#include <set>

namespace agprune {

namespace {

using nlohmann::json;

// Reads known keys from one object and rejects anything left over.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) {
      throw ConfigError("'" + name_ + "' must be a JSON object");
    }
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) {
      return;
    }
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("'" + name_ + "." + key + "' has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) {
        throw ConfigError("unknown configuration key '" + name_ + "." + key + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

CorpusSource parse_source(std::string_view text) {
  if (text == "synthetic") {
    return CorpusSource::synthetic;
  }
  if (text == "text_file") {
    return CorpusSource::text_file;
  }
  throw ConfigError("unknown corpus source '" + std::string(text) + "'");
}

Grouping parse_grouping(std::string_view text) {
  if (text == "per_output_row") {
    return Grouping::per_output_row;
  }
  if (text == "per_layer_global") {
    return Grouping::per_layer_global;
  }
  throw ConfigError("unknown grouping '" + std::string(text) + "'");
}

}  // namespace

std::string_view to_string(AgentMode mode) {
  return mode == AgentMode::llm ? "llm" : "heuristic";
}

AgentMode parse_agent_mode(std::string_view text) {
  if (text == "heuristic") {
    return AgentMode::heuristic;
  }
  if (text == "llm") {
    return AgentMode::llm;
  }
  throw ConfigError("unknown agent mode '" + std::string(text) + "' (expected llm|heuristic)");
}

void CliConfig::set_seed(std::uint64_t seed) {
  model.rng_seed = seed;
  corpus.seed = seed;
  run.split_seed = seed;
}

void CliConfig::validate() const {
  model.validate();
  run.validate();
  if (agent_mode == AgentMode::llm) {
    endpoint.validate();
  }
  if (corpus.n_samples < 1) {
    throw ConfigError("corpus.n_samples must be at least 1");
  }
  if (corpus.source == CorpusSource::text_file) {
    if (corpus.path.empty()) {
      throw ConfigError("corpus.path is required for a text_file corpus");
    }
    if (model.vocab_size != 256) {
      throw ConfigError("a text_file corpus uses byte tokens and needs model.vocab_size = 256");
    }
  }
}

json model_config_to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"seq_len", c.seq_len},   {"n_blocks", c.n_blocks},
          {"d_model", c.d_model},       {"n_heads", c.n_heads},   {"d_ff", c.d_ff},
          {"rng_seed", c.rng_seed},     {"precision_mode", to_string(c.precision_mode)}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  Section s(j, "model");
  s.read("vocab_size", c.vocab_size);
  s.read("seq_len", c.seq_len);
  s.read("n_blocks", c.n_blocks);
  s.read("d_model", c.d_model);
  s.read("n_heads", c.n_heads);
  s.read("d_ff", c.d_ff);
  s.read("rng_seed", c.rng_seed);
  std::string mode(to_string(c.precision_mode));
  s.read("precision_mode", mode);
  c.precision_mode = parse_precision_mode(mode);
  s.finish();
  return c;
}

json to_json(const CliConfig& c) {
  const auto& r = c.run;
  return {
      {"model", model_config_to_json(c.model)},
      {"corpus",
       {{"source", c.corpus.source == CorpusSource::synthetic ? "synthetic" : "text_file"},
        {"path", c.corpus.path},
        {"n_samples", c.corpus.n_samples},
        {"seed", c.corpus.seed}}},
      {"run",
       {{"target_sparsity", r.target_sparsity},
        {"rollback_threshold", r.rollback_threshold},
        {"max_iterations", r.max_iterations},
        {"gradient_cadence", r.gradient_cadence},
        {"n_act", r.n_act},
        {"n_grad", r.n_grad},
        {"n_ppl", r.n_ppl},
        {"accounting", to_string(r.accounting)},
        {"grouping", to_string(r.grouping)},
        {"split_seed", r.split_seed},
        {"fallback_to_heuristic", r.fallback_to_heuristic},
        {"rubric",
         {{"excellent_min_gain", r.rubric.excellent_min_gain},
          {"excellent_max_ppl_pct", r.rubric.excellent_max_ppl_pct},
          {"good_max_ppl_pct", r.rubric.good_max_ppl_pct},
          {"marginal_max_ppl_pct", r.rubric.marginal_max_ppl_pct}}}}},
      {"agent",
       {{"mode", to_string(c.agent_mode)},
        {"url", c.endpoint.url},
        {"model", c.endpoint.model},
        {"temperature", c.endpoint.temperature},
        {"timeout_seconds", c.endpoint.timeout_seconds},
        {"max_retries", c.endpoint.max_retries},
        {"api_key_env", c.endpoint.api_key_env},
        {"heuristic",
         {{"max_layers", c.heuristic.max_layers},
          {"max_z_grad", c.heuristic.max_z_grad},
          {"max_layer_sparsity", c.heuristic.max_layer_sparsity}}}}},
      {"log_timing", c.log_timing}};
}

CliConfig cli_config_from_json(const json& j) {
  CliConfig c;
  Section top(j, "$");
  if (const auto* m = top.child("model")) {
    c.model = model_config_from_json(*m);
  }
  if (const auto* cj = top.child("corpus")) {
    Section s(*cj, "corpus");
    std::string source = "synthetic";
    s.read("source", source);
    c.corpus.source = parse_source(source);
    s.read("path", c.corpus.path);
    s.read("n_samples", c.corpus.n_samples);
    s.read("seed", c.corpus.seed);
    s.finish();
  }
  if (const auto* rj = top.child("run")) {
    Section s(*rj, "run");
    auto& r = c.run;
    s.read("target_sparsity", r.target_sparsity);
    s.read("rollback_threshold", r.rollback_threshold);
    s.read("max_iterations", r.max_iterations);
    s.read("gradient_cadence", r.gradient_cadence);
    s.read("n_act", r.n_act);
    s.read("n_grad", r.n_grad);
    s.read("n_ppl", r.n_ppl);
    std::string accounting(to_string(r.accounting));
    s.read("accounting", accounting);
    r.accounting = parse_accounting(accounting);
    std::string grouping(to_string(r.grouping));
    s.read("grouping", grouping);
    r.grouping = parse_grouping(grouping);
    s.read("split_seed", r.split_seed);
    s.read("fallback_to_heuristic", r.fallback_to_heuristic);
    if (const auto* rub = s.child("rubric")) {
      Section rs(*rub, "run.rubric");
      rs.read("excellent_min_gain", r.rubric.excellent_min_gain);
      rs.read("excellent_max_ppl_pct", r.rubric.excellent_max_ppl_pct);
      rs.read("good_max_ppl_pct", r.rubric.good_max_ppl_pct);
      rs.read("marginal_max_ppl_pct", r.rubric.marginal_max_ppl_pct);
      rs.finish();
    }
    s.finish();
  }
  if (const auto* aj = top.child("agent")) {
    Section s(*aj, "agent");
    std::string mode(to_string(c.agent_mode));
    s.read("mode", mode);
    c.agent_mode = parse_agent_mode(mode);
    s.read("url", c.endpoint.url);
    s.read("model", c.endpoint.model);
    s.read("temperature", c.endpoint.temperature);
    s.read("timeout_seconds", c.endpoint.timeout_seconds);
    s.read("max_retries", c.endpoint.max_retries);
    s.read("api_key_env", c.endpoint.api_key_env);
    if (const auto* hj = s.child("heuristic")) {
      Section hs(*hj, "agent.heuristic");
      hs.read("max_layers", c.heuristic.max_layers);
      hs.read("max_z_grad", c.heuristic.max_z_grad);
      hs.read("max_layer_sparsity", c.heuristic.max_layer_sparsity);
      hs.finish();
    }
    s.finish();
  }
  top.read("log_timing", c.log_timing);
  top.finish();
  c.run.fallback_policy = c.heuristic;
  return c;
}

CliConfig load_cli_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config file '" + path.string() + "'");
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return cli_config_from_json(j);
}

Corpus load_corpus(const CorpusConfig& corpus, const ModelConfig& model) {
  if (corpus.source == CorpusSource::text_file) {
    return load_text_corpus(corpus.path, model.seq_len, corpus.n_samples, corpus.seed);
  }
  return synth_corpus(corpus.seed, model.vocab_size, model.seq_len, corpus.n_samples);
}

}  // namespace agprune
