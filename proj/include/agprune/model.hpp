// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Toy decoder-only transformer used as the pruning substrate.
//
// Architecture per block (pre-norm):
//   a = rmsnorm(h) ; h += o_proj(causal_mha(q_proj a, k_proj a, v_proj a))
//   m = rmsnorm(h) ; h += down_proj(gelu(up_proj m))
// followed by a final rmsnorm and an untied lm_head. Token and position
// embeddings and the norm gains are dense and never pruned.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "agprune/common.hpp"

namespace agprune {

enum class PrecisionMode { standard32, verify64 };

enum class LayerRole { q_proj, k_proj, v_proj, o_proj, mlp_up, mlp_down, lm_head };

std::string_view to_string(LayerRole role);
std::string_view to_string(PrecisionMode mode);
PrecisionMode parse_precision_mode(std::string_view text);

struct ModelConfig {
  std::size_t vocab_size = 256;
  std::size_t seq_len = 128;
  std::size_t n_blocks = 2;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t d_ff = 256;
  std::uint64_t rng_seed = 7;
  PrecisionMode precision_mode = PrecisionMode::standard32;

  /// Throws ConfigError describing the first violated invariant.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// One prunable projection. The effective weight is weights ⊙ mask.
struct LayerTensorState {
  std::string name;
  LayerRole role = LayerRole::q_proj;
  Matrix weights;  // d_out × d_in
  Mask mask;       // same shape, 1 = active

  std::size_t d_out() const { return weights.rows(); }
  std::size_t d_in() const { return weights.cols(); }
  std::size_t active_count() const;
  double sparsity() const;
};

/// Embeddings and norm gains, stored flat with their logical shape.
struct DenseParam {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

/// Values are held in double; in standard32 mode every value is exactly
/// representable as binary32 and arithmetic runs in float with double
/// accumulation.
struct ModelGraph {
  ModelConfig config;
  std::vector<LayerTensorState> layers;  // blocks in order (q,k,v,o,up,down), then lm_head
  std::vector<DenseParam> dense;         // tok_emb, pos_emb, per-block norms, final_norm

  const LayerTensorState* find_layer(std::string_view name) const;
  LayerTensorState* find_layer(std::string_view name);
  std::optional<std::size_t> layer_index(std::string_view name) const;

  std::size_t prunable_parameter_count() const;
  std::size_t dense_parameter_count() const;
};

/// Per-layer sum of squared input features, accumulated over token rows.
struct ForwardCapture {
  std::vector<std::vector<double>> sum_squares;  // [layer][d_in]
  std::size_t row_count = 0;

  static ForwardCapture for_model(const ModelGraph& model);
};

ModelGraph build_model(const ModelConfig& config);

/// Mean next-token negative log-likelihood over every predicted position of
/// the batch (rows are samples). When a capture is supplied, the input rows
/// of every prunable layer are squared and summed into it.
double forward_nll(const ModelGraph& model, const TokenMatrix& batch,
                   ForwardCapture* capture = nullptr);

/// Reverse-mode gradient of forward_nll's mean loss with respect to every
/// prunable weight matrix, in layer order. Masked positions are zero.
std::vector<Matrix> backward_weight_grads(const ModelGraph& model, const TokenMatrix& batch);

/// exp of the token-weighted mean NLL over all sample batches.
double perplexity(const ModelGraph& model, std::span<const TokenMatrix> samples);

}  // namespace agprune
