// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Mask-only pruning driven by Wanda scores, and sparsity accounting.

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "agprune/model.hpp"

namespace agprune {

inline constexpr double kMinDelta = 0.01;
inline constexpr double kMaxDelta = 0.15;

enum class Grouping { per_output_row, per_layer_global };
enum class SparsityAccounting { prunable_only, all_params };

std::string_view to_string(Grouping grouping);
std::string_view to_string(SparsityAccounting accounting);
SparsityAccounting parse_accounting(std::string_view text);

struct PruneRequest {
  std::string layer;
  double delta = 0.0;
  Grouping grouping = Grouping::per_output_row;
};

struct PruneOutcome {
  std::size_t newly_zeroed = 0;
  double layer_sparsity_before = 0.0;
  double layer_sparsity_after = 0.0;
  double global_sparsity_after = 0.0;
};

using Coord = std::pair<std::size_t, std::size_t>;

/// Chooses n_zero active coordinates to mask. per_output_row apportions
/// n_zero across rows in proportion to each row's active count (largest
/// remainder, ties to the lower row) and takes the lowest scores within each
/// row; per_layer_global takes the lowest n_zero active scores overall. Score
/// ties break by (row, col) ascending. Result is sorted by (row, col).
std::vector<Coord> select_prune_set(const Matrix& scores, const Mask& mask, std::size_t n_zero,
                                    Grouping grouping);

/// Per-row counts used by the per_output_row grouping.
std::vector<std::size_t> apportion_rows(const Mask& mask, std::size_t n_zero);

/// Masks round(delta · d_out · d_in) further weights of the named layer
/// (capped at the active count). Weights are never modified and no weight is
/// ever re-activated. Throws on an unknown layer or delta outside
/// [kMinDelta, kMaxDelta].
PruneOutcome apply_prune(ModelGraph& model, const PruneRequest& request, const Matrix& scores,
                         SparsityAccounting accounting = SparsityAccounting::prunable_only);

/// Zeroed fraction over prunable masks, or over every model parameter when
/// accounting is all_params (dense parameters count as nonzero).
double global_sparsity(const ModelGraph& model, SparsityAccounting accounting);

}  // namespace agprune
