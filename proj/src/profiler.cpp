// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "agprune/profiler.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace agprune {

ActivationNorms activation_norms(const ForwardCapture& capture) {
  ActivationNorms norms;
  norms.row_count = capture.row_count;
  norms.per_layer.reserve(capture.sum_squares.size());
  for (const auto& acc : capture.sum_squares) {
    std::vector<double> n(acc.size());
    std::transform(acc.begin(), acc.end(), n.begin(), [](double s) { return std::sqrt(s); });
    norms.per_layer.push_back(std::move(n));
  }
  return norms;
}

Matrix wanda_scores(const Matrix& weights, std::span<const double> act_norms) {
  if (act_norms.size() != weights.cols()) {
    throw ShapeError("activation norm length " + std::to_string(act_norms.size()) +
                     " does not match weight columns " + std::to_string(weights.cols()));
  }
  Matrix scores(weights.rows(), weights.cols());
  for (std::size_t i = 0; i < weights.rows(); ++i) {
    for (std::size_t j = 0; j < weights.cols(); ++j) {
      scores(i, j) = std::abs(weights(i, j)) * act_norms[j];
    }
  }
  return scores;
}

double layer_sensitivity(const Matrix& scores, const Mask& mask, double k) {
  if (!scores.same_shape(mask)) {
    throw ShapeError("scores and mask shapes differ");
  }
  if (!(k > 0.0 && k <= 100.0)) {
    throw ConfigError("percentile must lie in (0, 100]");
  }
  std::vector<double> active;
  active.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (mask.data()[i]) {
      active.push_back(scores.data()[i]);
    }
  }
  if (active.empty()) {
    throw ShapeError("layer has no active weights");
  }
  const auto n = static_cast<double>(active.size());
  auto rank = static_cast<std::size_t>(std::ceil(k / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, active.size());
  std::nth_element(active.begin(), active.begin() + static_cast<long>(rank - 1), active.end());
  return active[rank - 1];
}

double gradient_importance(std::span<const Matrix> grads, const Mask& mask) {
  if (grads.empty()) {
    throw ShapeError("gradient importance needs at least one gradient matrix");
  }
  for (const auto& g : grads) {
    if (!g.same_shape(mask)) {
      throw ShapeError("gradient matrix shape does not match mask");
    }
  }
  const auto m = static_cast<double>(grads.size());
  double total = 0.0;
  std::size_t active = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask.data()[i]) {
      continue;
    }
    double sum = 0.0;
    for (const auto& g : grads) {
      sum += std::abs(g.data()[i]);
    }
    total += sum / m;
    ++active;
  }
  return active == 0 ? 0.0 : total / static_cast<double>(active);
}

GradientAccumulator::GradientAccumulator(const ModelGraph& model) {
  for (const auto& layer : model.layers) {
    abs_sums_.emplace_back(layer.d_out(), layer.d_in());
  }
}

void GradientAccumulator::add(std::span<const Matrix> per_layer_grads) {
  if (per_layer_grads.size() != abs_sums_.size()) {
    throw ShapeError("gradient set does not cover every layer");
  }
  for (std::size_t l = 0; l < abs_sums_.size(); ++l) {
    if (!abs_sums_[l].same_shape(per_layer_grads[l])) {
      throw ShapeError("gradient matrix shape does not match layer");
    }
    auto& dst = abs_sums_[l].data();
    const auto& src = per_layer_grads[l].data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] += std::abs(src[i]);
    }
  }
  ++samples_;
}

GradientStats GradientAccumulator::finish(const ModelGraph& model, std::size_t iteration) const {
  if (samples_ == 0) {
    throw ShapeError("no gradient samples accumulated");
  }
  GradientStats stats;
  stats.samples_used = samples_;
  stats.iteration_computed = iteration;
  const auto m = static_cast<double>(samples_);
  for (std::size_t l = 0; l < abs_sums_.size(); ++l) {
    const auto& mask = model.layers[l].mask.data();
    double total = 0.0;
    std::size_t active = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) {
        total += abs_sums_[l].data()[i] / m;
        ++active;
      }
    }
    stats.per_layer.push_back(active == 0 ? 0.0 : total / static_cast<double>(active));
  }
  return stats;
}

std::vector<double> zscore_normalize(std::span<const double> values, double eps) {
  if (values.empty()) {
    throw ShapeError("z-score normalization needs at least one value");
  }
  // A constant population has σ = 0 exactly; the summed mean can still carry
  // rounding noise, so return the exact answer directly.
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) {
    return std::vector<double>(values.size(), 0.0);
  }
  const auto n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) {
    mean += v;
  }
  mean /= n;
  double var = 0.0;
  for (double v : values) {
    var += (v - mean) * (v - mean);
  }
  const double sigma = std::sqrt(var / n);
  std::vector<double> z(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    z[i] = (values[i] - mean) / (sigma + eps);
  }
  return z;
}

std::vector<LayerProfile> build_profiles(const ModelGraph& model, const ActivationNorms& norms,
                                         const GradientStats& grads) {
  if (norms.per_layer.size() != model.layers.size()) {
    throw ShapeError("activation norms missing for some layers");
  }
  if (grads.per_layer.size() != model.layers.size()) {
    throw ShapeError("gradient statistics missing for some layers");
  }
  std::vector<LayerProfile> profiles;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    if (layer.active_count() == 0) {
      continue;
    }
    const Matrix scores = wanda_scores(layer.weights, norms.per_layer[l]);
    LayerProfile p;
    p.layer = layer.name;
    p.sensitivity = layer_sensitivity(scores, layer.mask);
    p.gradient = grads.per_layer[l];
    p.sparsity = layer.sparsity();
    profiles.push_back(std::move(p));
  }
  if (profiles.empty()) {
    return profiles;
  }
  std::vector<double> s, g;
  for (const auto& p : profiles) {
    s.push_back(p.sensitivity);
    g.push_back(p.gradient);
  }
  const auto zs = zscore_normalize(s);
  const auto zg = zscore_normalize(g);
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    profiles[i].z_sens = zs[i];
    profiles[i].z_grad = zg[i];
  }
  std::stable_sort(profiles.begin(), profiles.end(), [](const LayerProfile& a, const LayerProfile& b) {
    if (a.z_sens != b.z_sens) {
      return a.z_sens < b.z_sens;
    }
    return a.layer < b.layer;
  });
  return profiles;
}

nlohmann::json profiles_to_json(std::span<const LayerProfile> profiles) {
  auto out = nlohmann::json::array();
  for (const auto& p : profiles) {
    out.push_back({{"layer", p.layer},
                   {"s", p.sensitivity},
                   {"g", p.gradient},
                   {"z_sens", p.z_sens},
                   {"z_grad", p.z_grad},
                   {"sparsity", p.sparsity}});
  }
  return out;
}

}  // namespace agprune
