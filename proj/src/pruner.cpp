// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "agprune/pruner.hpp"

#include <algorithm>
#include <numeric>

namespace agprune {

namespace {

struct Candidate {
  double score;
  std::size_t row;
  std::size_t col;
};

bool lower(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) {
    return a.score < b.score;
  }
  if (a.row != b.row) {
    return a.row < b.row;
  }
  return a.col < b.col;
}

std::vector<Candidate> lowest(std::vector<Candidate> pool, std::size_t n) {
  std::partial_sort(pool.begin(), pool.begin() + static_cast<long>(n), pool.end(), lower);
  pool.resize(n);
  return pool;
}

}  // namespace

std::string_view to_string(Grouping grouping) {
  return grouping == Grouping::per_layer_global ? "per_layer_global" : "per_output_row";
}

std::string_view to_string(SparsityAccounting accounting) {
  return accounting == SparsityAccounting::all_params ? "all" : "prunable";
}

SparsityAccounting parse_accounting(std::string_view text) {
  if (text == "prunable" || text == "prunable_only") {
    return SparsityAccounting::prunable_only;
  }
  if (text == "all" || text == "all_params") {
    return SparsityAccounting::all_params;
  }
  throw ConfigError("unknown sparsity accounting '" + std::string(text) + "'");
}

std::vector<std::size_t> apportion_rows(const Mask& mask, std::size_t n_zero) {
  const std::size_t rows = mask.rows();
  std::vector<std::size_t> active(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = mask.row(r);
    active[r] = static_cast<std::size_t>(std::count(row.begin(), row.end(), 1));
  }
  const std::size_t total = std::accumulate(active.begin(), active.end(), std::size_t{0});
  std::vector<std::size_t> quota(rows, 0);
  if (total == 0 || n_zero == 0) {
    return quota;
  }
  // Exact integer largest-remainder: quota = floor(n·a/A), remainder n·a mod A.
  std::vector<std::size_t> remainder(rows, 0);
  std::size_t assigned = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t num = n_zero * active[r];
    quota[r] = num / total;
    remainder[r] = num % total;
    assigned += quota[r];
  }
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n_zero && k < rows; ++k) {
    const std::size_t r = order[k];
    if (quota[r] < active[r]) {
      ++quota[r];
      ++assigned;
    }
  }
  return quota;
}

std::vector<Coord> select_prune_set(const Matrix& scores, const Mask& mask, std::size_t n_zero,
                                    Grouping grouping) {
  if (!scores.same_shape(mask)) {
    throw ShapeError("scores and mask shapes differ");
  }
  const auto active =
      static_cast<std::size_t>(std::count(mask.data().begin(), mask.data().end(), 1));
  if (n_zero > active) {
    throw ShapeError("cannot zero " + std::to_string(n_zero) + " weights, only " +
                     std::to_string(active) + " active");
  }
  std::vector<Coord> chosen;
  if (n_zero == 0) {
    return chosen;
  }

  if (grouping == Grouping::per_layer_global) {
    std::vector<Candidate> pool;
    pool.reserve(active);
    for (std::size_t i = 0; i < scores.rows(); ++i) {
      for (std::size_t j = 0; j < scores.cols(); ++j) {
        if (mask(i, j)) {
          pool.push_back({scores(i, j), i, j});
        }
      }
    }
    for (const auto& c : lowest(std::move(pool), n_zero)) {
      chosen.emplace_back(c.row, c.col);
    }
  } else {
    const auto quota = apportion_rows(mask, n_zero);
    for (std::size_t i = 0; i < scores.rows(); ++i) {
      if (quota[i] == 0) {
        continue;
      }
      std::vector<Candidate> pool;
      for (std::size_t j = 0; j < scores.cols(); ++j) {
        if (mask(i, j)) {
          pool.push_back({scores(i, j), i, j});
        }
      }
      for (const auto& c : lowest(std::move(pool), quota[i])) {
        chosen.emplace_back(c.row, c.col);
      }
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

PruneOutcome apply_prune(ModelGraph& model, const PruneRequest& request, const Matrix& scores,
                         SparsityAccounting accounting) {
  auto* layer = model.find_layer(request.layer);
  if (!layer) {
    throw ConfigError("unknown layer '" + request.layer + "'");
  }
  if (!(request.delta >= kMinDelta && request.delta <= kMaxDelta)) {
    throw ConfigError("additional sparsity " + std::to_string(request.delta) +
                      " for layer '" + request.layer + "' is outside [0.01, 0.15]");
  }
  PruneOutcome outcome;
  outcome.layer_sparsity_before = layer->sparsity();
  const auto requested = static_cast<std::size_t>(
      round_half_away(request.delta * static_cast<double>(layer->weights.size())));
  const std::size_t n_zero = std::min(requested, layer->active_count());
  for (const auto& [r, c] : select_prune_set(scores, layer->mask, n_zero, request.grouping)) {
    layer->mask(r, c) = 0;
  }
  outcome.newly_zeroed = n_zero;
  outcome.layer_sparsity_after = layer->sparsity();
  outcome.global_sparsity_after = global_sparsity(model, accounting);
  return outcome;
}

double global_sparsity(const ModelGraph& model, SparsityAccounting accounting) {
  std::size_t zeroed = 0;
  std::size_t total = 0;
  for (const auto& layer : model.layers) {
    zeroed += layer.mask.size() - layer.active_count();
    total += layer.mask.size();
  }
  if (accounting == SparsityAccounting::all_params) {
    total += model.dense_parameter_count();
  }
  return total == 0 ? 0.0 : static_cast<double>(zeroed) / static_cast<double>(total);
}

}  // namespace agprune
