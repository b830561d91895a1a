// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Layer sensitivity profiling: Wanda-style weight-activation scores, a
// percentile sensitivity per layer, mean absolute gradient importance, and
// z-score normalization across the layer population.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "agprune/model.hpp"

namespace agprune {

inline constexpr double kSensitivityPercentile = 10.0;
inline constexpr double kZScoreEpsilon = 1e-9;

/// Per-layer ℓ2 norm of each input feature across all captured rows.
struct ActivationNorms {
  std::vector<std::vector<double>> per_layer;  // [layer][d_in]
  std::size_t row_count = 0;
};

struct GradientStats {
  std::vector<double> per_layer;  // g_ℓ ≥ 0
  std::size_t samples_used = 0;
  std::size_t iteration_computed = 0;
};

struct LayerProfile {
  std::string layer;
  double sensitivity = 0.0;  // raw s_ℓ
  double gradient = 0.0;     // raw g_ℓ
  double z_sens = 0.0;
  double z_grad = 0.0;
  double sparsity = 0.0;
};

ActivationNorms activation_norms(const ForwardCapture& capture);

/// S[i][j] = |W[i][j]| · norms[j]
Matrix wanda_scores(const Matrix& weights, std::span<const double> act_norms);

/// Nearest-rank k-th percentile of the scores at active mask positions:
/// the element at rank ceil(k/100 · n_active) of the ascending sort (rank ≥ 1).
double layer_sensitivity(const Matrix& scores, const Mask& mask,
                         double k = kSensitivityPercentile);

/// Element-wise mean of |∇| over the M supplied samples, then the mean of
/// that matrix over active positions. A layer with no active position
/// yields 0.
double gradient_importance(std::span<const Matrix> grads, const Mask& mask);

/// Streaming form of gradient_importance for per-sample gradient batches.
class GradientAccumulator {
 public:
  explicit GradientAccumulator(const ModelGraph& model);
  void add(std::span<const Matrix> per_layer_grads);
  GradientStats finish(const ModelGraph& model, std::size_t iteration) const;

 private:
  std::vector<Matrix> abs_sums_;
  std::size_t samples_ = 0;
};

/// (v − mean) / (population stddev + eps), in input order.
std::vector<double> zscore_normalize(std::span<const double> values,
                                     double eps = kZScoreEpsilon);

/// Profiles for every prunable layer that still has an active weight, sorted
/// ascending by z_sens with ties broken by layer name. Fully masked layers
/// are left out of both the listing and the z-score population.
std::vector<LayerProfile> build_profiles(const ModelGraph& model, const ActivationNorms& norms,
                                         const GradientStats& grads);

nlohmann::json profiles_to_json(std::span<const LayerProfile> profiles);

}  // namespace agprune
