// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "agprune/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "parallel.hpp"

namespace agprune {

namespace {

constexpr double kNormEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

constexpr std::size_t kLayersPerBlock = 6;

std::size_t attn_norm_index(std::size_t block) { return 2 + 2 * block; }
std::size_t mlp_norm_index(std::size_t block) { return 3 + 2 * block; }
std::size_t final_norm_index(const ModelConfig& cfg) { return 2 + 2 * cfg.n_blocks; }

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// Masked weights and dense parameters cast to the compute type once per call.
template <typename T>
struct Effective {
  std::vector<std::vector<T>> layers;
  std::vector<std::vector<T>> dense;
};

template <typename T>
Effective<T> materialize(const ModelGraph& model) {
  Effective<T> eff;
  eff.layers.reserve(model.layers.size());
  for (const auto& layer : model.layers) {
    std::vector<T> w(layer.weights.size());
    const auto& src = layer.weights.data();
    const auto& mask = layer.mask.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = mask[i] ? static_cast<T>(src[i]) : T{0};
    }
    eff.layers.push_back(std::move(w));
  }
  for (const auto& p : model.dense) {
    eff.dense.emplace_back(p.values.begin(), p.values.end());
  }
  return eff;
}

// y[t, i] = sum_j w[i, j] x[t, j]
template <typename T>
void linear(const std::vector<T>& x, std::size_t rows, std::size_t in, const std::vector<T>& w,
            std::size_t out, std::vector<T>& y) {
  y.assign(rows * out, T{0});
  for (std::size_t t = 0; t < rows; ++t) {
    const T* xr = x.data() + t * in;
    for (std::size_t i = 0; i < out; ++i) {
      const T* wr = w.data() + i * in;
      double acc = 0.0;
      for (std::size_t j = 0; j < in; ++j) {
        acc += static_cast<double>(wr[j]) * static_cast<double>(xr[j]);
      }
      y[t * out + i] = static_cast<T>(acc);
    }
  }
}

// dx[t, j] = sum_i dy[t, i] w[i, j]
template <typename T>
void linear_input_grad(const std::vector<T>& dy, std::size_t rows, std::size_t out,
                       const std::vector<T>& w, std::size_t in, std::vector<T>& dx) {
  dx.assign(rows * in, T{0});
  std::vector<double> acc(in);
  for (std::size_t t = 0; t < rows; ++t) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = 0; i < out; ++i) {
      const double g = static_cast<double>(dy[t * out + i]);
      if (g == 0.0) {
        continue;
      }
      const T* wr = w.data() + i * in;
      for (std::size_t j = 0; j < in; ++j) {
        acc[j] += g * static_cast<double>(wr[j]);
      }
    }
    for (std::size_t j = 0; j < in; ++j) {
      dx[t * in + j] = static_cast<T>(acc[j]);
    }
  }
}

// dw[i, j] += sum_t dy[t, i] x[t, j]
template <typename T>
void linear_weight_grad(const std::vector<T>& dy, const std::vector<T>& x, std::size_t rows,
                        std::size_t out, std::size_t in, std::vector<double>& dw) {
  for (std::size_t t = 0; t < rows; ++t) {
    const T* xr = x.data() + t * in;
    for (std::size_t i = 0; i < out; ++i) {
      const double g = static_cast<double>(dy[t * out + i]);
      if (g == 0.0) {
        continue;
      }
      double* dwr = dw.data() + i * in;
      for (std::size_t j = 0; j < in; ++j) {
        dwr[j] += g * static_cast<double>(xr[j]);
      }
    }
  }
}

template <typename T>
void rmsnorm(const std::vector<T>& h, std::size_t rows, std::size_t d, const std::vector<T>& gain,
             std::vector<T>& out, std::vector<double>& inv_rms) {
  out.assign(rows * d, T{0});
  inv_rms.assign(rows, 0.0);
  for (std::size_t t = 0; t < rows; ++t) {
    const T* hr = h.data() + t * d;
    double ss = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      ss += static_cast<double>(hr[j]) * static_cast<double>(hr[j]);
    }
    const double r = 1.0 / std::sqrt(ss / static_cast<double>(d) + kNormEps);
    inv_rms[t] = r;
    for (std::size_t j = 0; j < d; ++j) {
      out[t * d + j] =
          static_cast<T>(static_cast<double>(gain[j]) * static_cast<double>(hr[j]) * r);
    }
  }
}

// Adds the input gradient of rmsnorm into dh.
template <typename T>
void rmsnorm_backward(const std::vector<T>& dout, const std::vector<T>& h, std::size_t rows,
                      std::size_t d, const std::vector<T>& gain, const std::vector<double>& inv_rms,
                      std::vector<T>& dh) {
  for (std::size_t t = 0; t < rows; ++t) {
    const double r = inv_rms[t];
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      s += static_cast<double>(dout[t * d + j]) * static_cast<double>(gain[j]) *
           static_cast<double>(h[t * d + j]);
    }
    const double coeff = r * r * r * s / static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double g = r * static_cast<double>(gain[j]) * static_cast<double>(dout[t * d + j]) -
                       coeff * static_cast<double>(h[t * d + j]);
      dh[t * d + j] = static_cast<T>(static_cast<double>(dh[t * d + j]) + g);
    }
  }
}

template <typename T>
struct BlockActs {
  std::vector<T> h_in, a, q, k, v, probs, y, h_mid, m, u, z;
  std::vector<double> inv_rms1, inv_rms2;
};

template <typename T>
struct SampleActs {
  std::size_t len = 0;
  std::vector<BlockActs<T>> blocks;
  std::vector<T> h_out, f, logits;
  std::vector<double> inv_rmsf;
  double nll_sum = 0.0;
  std::size_t predicted = 0;
};

template <typename T>
SampleActs<T> forward_sample(const ModelConfig& cfg, const Effective<T>& eff,
                             std::span<const std::uint32_t> tokens) {
  const std::size_t L = tokens.size();
  const std::size_t d = cfg.d_model;
  const std::size_t H = cfg.n_heads;
  const std::size_t hd = d / H;
  const std::size_t ff = cfg.d_ff;
  const std::size_t V = cfg.vocab_size;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  SampleActs<T> acts;
  acts.len = L;
  acts.blocks.resize(cfg.n_blocks);

  std::vector<T> h(L * d);
  const auto& tok_emb = eff.dense[0];
  const auto& pos_emb = eff.dense[1];
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t j = 0; j < d; ++j) {
      h[t * d + j] = static_cast<T>(static_cast<double>(tok_emb[tokens[t] * d + j]) +
                                    static_cast<double>(pos_emb[t * d + j]));
    }
  }

  for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
    auto& ba = acts.blocks[b];
    const std::size_t base = b * kLayersPerBlock;
    ba.h_in = h;
    rmsnorm(ba.h_in, L, d, eff.dense[attn_norm_index(b)], ba.a, ba.inv_rms1);
    linear(ba.a, L, d, eff.layers[base + 0], d, ba.q);
    linear(ba.a, L, d, eff.layers[base + 1], d, ba.k);
    linear(ba.a, L, d, eff.layers[base + 2], d, ba.v);

    ba.probs.assign(H * L * L, T{0});
    ba.y.assign(L * d, T{0});
    std::vector<double> scores(L);
    std::vector<double> yacc(hd);
    for (std::size_t head = 0; head < H; ++head) {
      const std::size_t off = head * hd;
      for (std::size_t i = 0; i < L; ++i) {
        double max_s = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j <= i; ++j) {
          double s = 0.0;
          for (std::size_t c = 0; c < hd; ++c) {
            s += static_cast<double>(ba.q[i * d + off + c]) *
                 static_cast<double>(ba.k[j * d + off + c]);
          }
          scores[j] = s * scale;
          max_s = std::max(max_s, scores[j]);
        }
        double denom = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          scores[j] = std::exp(scores[j] - max_s);
          denom += scores[j];
        }
        T* prow = ba.probs.data() + (head * L + i) * L;
        std::fill(yacc.begin(), yacc.end(), 0.0);
        for (std::size_t j = 0; j <= i; ++j) {
          prow[j] = static_cast<T>(scores[j] / denom);
          const double p = static_cast<double>(prow[j]);
          for (std::size_t c = 0; c < hd; ++c) {
            yacc[c] += p * static_cast<double>(ba.v[j * d + off + c]);
          }
        }
        for (std::size_t c = 0; c < hd; ++c) {
          ba.y[i * d + off + c] = static_cast<T>(yacc[c]);
        }
      }
    }

    std::vector<T> o;
    linear(ba.y, L, d, eff.layers[base + 3], d, o);
    ba.h_mid.resize(L * d);
    for (std::size_t i = 0; i < L * d; ++i) {
      ba.h_mid[i] = static_cast<T>(static_cast<double>(ba.h_in[i]) + static_cast<double>(o[i]));
    }
    rmsnorm(ba.h_mid, L, d, eff.dense[mlp_norm_index(b)], ba.m, ba.inv_rms2);
    linear(ba.m, L, d, eff.layers[base + 4], ff, ba.u);
    ba.z.resize(L * ff);
    for (std::size_t i = 0; i < L * ff; ++i) {
      ba.z[i] = static_cast<T>(gelu(static_cast<double>(ba.u[i])));
    }
    std::vector<T> down;
    linear(ba.z, L, ff, eff.layers[base + 5], d, down);
    for (std::size_t i = 0; i < L * d; ++i) {
      h[i] = static_cast<T>(static_cast<double>(ba.h_mid[i]) + static_cast<double>(down[i]));
    }
  }

  acts.h_out = h;
  rmsnorm(acts.h_out, L, d, eff.dense[final_norm_index(cfg)], acts.f, acts.inv_rmsf);
  linear(acts.f, L, d, eff.layers.back(), V, acts.logits);

  for (std::size_t t = 0; t + 1 < L; ++t) {
    const T* lr = acts.logits.data() + t * V;
    double max_l = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < V; ++c) {
      max_l = std::max(max_l, static_cast<double>(lr[c]));
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < V; ++c) {
      sum += std::exp(static_cast<double>(lr[c]) - max_l);
    }
    const double lse = max_l + std::log(sum);
    acts.nll_sum += lse - static_cast<double>(lr[tokens[t + 1]]);
    ++acts.predicted;
  }
  return acts;
}

void accumulate_squares(const auto& x, std::size_t rows, std::size_t in, std::vector<double>& acc) {
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t j = 0; j < in; ++j) {
      const double v = static_cast<double>(x[t * in + j]);
      acc[j] += v * v;
    }
  }
}

template <typename T>
ForwardCapture capture_sample(const ModelGraph& model, const SampleActs<T>& acts) {
  const auto& cfg = model.config;
  ForwardCapture cap = ForwardCapture::for_model(model);
  const std::size_t L = acts.len;
  for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
    const auto& ba = acts.blocks[b];
    const std::size_t base = b * kLayersPerBlock;
    for (std::size_t r = 0; r < 3; ++r) {
      accumulate_squares(ba.a, L, cfg.d_model, cap.sum_squares[base + r]);
    }
    accumulate_squares(ba.y, L, cfg.d_model, cap.sum_squares[base + 3]);
    accumulate_squares(ba.m, L, cfg.d_model, cap.sum_squares[base + 4]);
    accumulate_squares(ba.z, L, cfg.d_ff, cap.sum_squares[base + 5]);
  }
  accumulate_squares(acts.f, L, cfg.d_model, cap.sum_squares.back());
  cap.row_count = L;
  return cap;
}

// Gradient of (loss_scale * nll_sum) for one sample, added into grads.
template <typename T>
void backward_sample(const ModelConfig& cfg, const Effective<T>& eff, const SampleActs<T>& acts,
                     std::span<const std::uint32_t> tokens, double loss_scale,
                     std::vector<std::vector<double>>& grads) {
  const std::size_t L = acts.len;
  const std::size_t d = cfg.d_model;
  const std::size_t H = cfg.n_heads;
  const std::size_t hd = d / H;
  const std::size_t ff = cfg.d_ff;
  const std::size_t V = cfg.vocab_size;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  std::vector<T> dlogits(L * V, T{0});
  for (std::size_t t = 0; t + 1 < L; ++t) {
    const T* lr = acts.logits.data() + t * V;
    double max_l = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < V; ++c) {
      max_l = std::max(max_l, static_cast<double>(lr[c]));
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < V; ++c) {
      sum += std::exp(static_cast<double>(lr[c]) - max_l);
    }
    for (std::size_t c = 0; c < V; ++c) {
      double p = std::exp(static_cast<double>(lr[c]) - max_l) / sum;
      if (c == tokens[t + 1]) {
        p -= 1.0;
      }
      dlogits[t * V + c] = static_cast<T>(p * loss_scale);
    }
  }

  const std::size_t lm = grads.size() - 1;
  linear_weight_grad(dlogits, acts.f, L, V, d, grads[lm]);
  std::vector<T> df;
  linear_input_grad(dlogits, L, V, eff.layers[lm], d, df);
  std::vector<T> dh(L * d, T{0});
  rmsnorm_backward(df, acts.h_out, L, d, eff.dense[final_norm_index(cfg)], acts.inv_rmsf, dh);

  for (std::size_t bi = cfg.n_blocks; bi-- > 0;) {
    const auto& ba = acts.blocks[bi];
    const std::size_t base = bi * kLayersPerBlock;

    // MLP: h_out = h_mid + down(gelu(up(m)))
    linear_weight_grad(dh, ba.z, L, d, ff, grads[base + 5]);
    std::vector<T> dz;
    linear_input_grad(dh, L, d, eff.layers[base + 5], ff, dz);
    std::vector<T> du(L * ff);
    for (std::size_t i = 0; i < L * ff; ++i) {
      du[i] = static_cast<T>(static_cast<double>(dz[i]) *
                             gelu_grad(static_cast<double>(ba.u[i])));
    }
    linear_weight_grad(du, ba.m, L, ff, d, grads[base + 4]);
    std::vector<T> dm;
    linear_input_grad(du, L, ff, eff.layers[base + 4], d, dm);
    std::vector<T> dh_mid = dh;
    rmsnorm_backward(dm, ba.h_mid, L, d, eff.dense[mlp_norm_index(bi)], ba.inv_rms2, dh_mid);

    // Attention: h_mid = h_in + o(attn(q, k, v))
    linear_weight_grad(dh_mid, ba.y, L, d, d, grads[base + 3]);
    std::vector<T> dy;
    linear_input_grad(dh_mid, L, d, eff.layers[base + 3], d, dy);

    std::vector<double> dq(L * d, 0.0), dk(L * d, 0.0), dv(L * d, 0.0);
    std::vector<double> dp(L);
    for (std::size_t head = 0; head < H; ++head) {
      const std::size_t off = head * hd;
      for (std::size_t i = 0; i < L; ++i) {
        const T* prow = ba.probs.data() + (head * L + i) * L;
        double dot = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          double s = 0.0;
          for (std::size_t c = 0; c < hd; ++c) {
            s += static_cast<double>(dy[i * d + off + c]) *
                 static_cast<double>(ba.v[j * d + off + c]);
          }
          dp[j] = s;
          const double p = static_cast<double>(prow[j]);
          dot += p * s;
          for (std::size_t c = 0; c < hd; ++c) {
            dv[j * d + off + c] += p * static_cast<double>(dy[i * d + off + c]);
          }
        }
        for (std::size_t j = 0; j <= i; ++j) {
          const double ds = static_cast<double>(prow[j]) * (dp[j] - dot) * scale;
          if (ds == 0.0) {
            continue;
          }
          for (std::size_t c = 0; c < hd; ++c) {
            dq[i * d + off + c] += ds * static_cast<double>(ba.k[j * d + off + c]);
            dk[j * d + off + c] += ds * static_cast<double>(ba.q[i * d + off + c]);
          }
        }
      }
    }
    const std::vector<T> dqt(dq.begin(), dq.end());
    const std::vector<T> dkt(dk.begin(), dk.end());
    const std::vector<T> dvt(dv.begin(), dv.end());
    linear_weight_grad(dqt, ba.a, L, d, d, grads[base + 0]);
    linear_weight_grad(dkt, ba.a, L, d, d, grads[base + 1]);
    linear_weight_grad(dvt, ba.a, L, d, d, grads[base + 2]);

    std::vector<T> da_q, da_k, da_v;
    linear_input_grad(dqt, L, d, eff.layers[base + 0], d, da_q);
    linear_input_grad(dkt, L, d, eff.layers[base + 1], d, da_k);
    linear_input_grad(dvt, L, d, eff.layers[base + 2], d, da_v);
    std::vector<T> da(L * d);
    for (std::size_t i = 0; i < L * d; ++i) {
      da[i] = static_cast<T>(static_cast<double>(da_q[i]) + static_cast<double>(da_k[i]) +
                             static_cast<double>(da_v[i]));
    }
    std::vector<T> dh_in = dh_mid;
    rmsnorm_backward(da, ba.h_in, L, d, eff.dense[attn_norm_index(bi)], ba.inv_rms1, dh_in);
    dh = std::move(dh_in);
  }
}

void check_batch(const ModelConfig& cfg, const TokenMatrix& batch) {
  if (batch.rows() == 0) {
    throw ShapeError("token batch has no rows");
  }
  if (batch.cols() < 2) {
    throw ShapeError("token batch rows need at least two tokens");
  }
  if (batch.cols() > cfg.seq_len) {
    throw ShapeError("token batch width " + std::to_string(batch.cols()) + " exceeds seq_len " +
                     std::to_string(cfg.seq_len));
  }
  for (const auto tok : batch.data()) {
    if (tok >= cfg.vocab_size) {
      throw ShapeError("token id " + std::to_string(tok) + " out of range for vocab " +
                       std::to_string(cfg.vocab_size));
    }
  }
}

struct NllSum {
  double sum = 0.0;
  std::size_t count = 0;
};

template <typename T>
NllSum nll_sum_impl(const ModelGraph& model, const TokenMatrix& batch, ForwardCapture* capture) {
  const auto eff = materialize<T>(model);
  const std::size_t n = batch.rows();
  std::vector<double> sums(n);
  std::vector<std::size_t> counts(n);
  std::vector<ForwardCapture> caps(capture ? n : 0);
  detail::parallel_for(n, [&](std::size_t r) {
    auto acts = forward_sample<T>(model.config, eff, batch.row(r));
    sums[r] = acts.nll_sum;
    counts[r] = acts.predicted;
    if (capture) {
      caps[r] = capture_sample(model, acts);
    }
  });
  NllSum out;
  for (std::size_t r = 0; r < n; ++r) {
    out.sum += sums[r];
    out.count += counts[r];
    if (capture) {
      for (std::size_t l = 0; l < caps[r].sum_squares.size(); ++l) {
        auto& dst = capture->sum_squares[l];
        const auto& src = caps[r].sum_squares[l];
        for (std::size_t j = 0; j < dst.size(); ++j) {
          dst[j] += src[j];
        }
      }
      capture->row_count += caps[r].row_count;
    }
  }
  return out;
}

NllSum nll_sum(const ModelGraph& model, const TokenMatrix& batch, ForwardCapture* capture) {
  check_batch(model.config, batch);
  if (capture) {
    if (capture->sum_squares.size() != model.layers.size()) {
      throw ShapeError("capture does not match the model's layer count");
    }
  }
  if (model.config.precision_mode == PrecisionMode::verify64) {
    return nll_sum_impl<double>(model, batch, capture);
  }
  return nll_sum_impl<float>(model, batch, capture);
}

template <typename T>
std::vector<Matrix> grads_impl(const ModelGraph& model, const TokenMatrix& batch) {
  const auto eff = materialize<T>(model);
  const std::size_t n = batch.rows();
  const double loss_scale =
      1.0 / static_cast<double>(n * (batch.cols() - 1));

  std::vector<std::vector<std::vector<double>>> per_sample(n);
  detail::parallel_for(n, [&](std::size_t r) {
    auto& g = per_sample[r];
    g.resize(model.layers.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      g[l].assign(model.layers[l].weights.size(), 0.0);
    }
    const auto acts = forward_sample<T>(model.config, eff, batch.row(r));
    backward_sample<T>(model.config, eff, acts, batch.row(r), loss_scale, g);
  });

  std::vector<Matrix> out;
  out.reserve(model.layers.size());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    Matrix g(layer.d_out(), layer.d_in());
    auto& dst = g.data();
    for (std::size_t r = 0; r < n; ++r) {
      const auto& src = per_sample[r][l];
      for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] += src[i];
      }
    }
    const auto& mask = layer.mask.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (!mask[i]) {
        dst[i] = 0.0;
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<double> gaussian_values(std::uint64_t seed, std::size_t n, double stddev,
                                    PrecisionMode mode) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) {
    x = rng.normal() * stddev;
    if (mode == PrecisionMode::standard32) {
      x = static_cast<double>(static_cast<float>(x));
    }
  }
  return v;
}

}  // namespace

std::string_view to_string(LayerRole role) {
  switch (role) {
    case LayerRole::q_proj: return "q_proj";
    case LayerRole::k_proj: return "k_proj";
    case LayerRole::v_proj: return "v_proj";
    case LayerRole::o_proj: return "o_proj";
    case LayerRole::mlp_up: return "mlp_up";
    case LayerRole::mlp_down: return "mlp_down";
    case LayerRole::lm_head: return "lm_head";
  }
  return "unknown";
}

std::string_view to_string(PrecisionMode mode) {
  return mode == PrecisionMode::verify64 ? "verify64" : "standard32";
}

PrecisionMode parse_precision_mode(std::string_view text) {
  if (text == "standard32") {
    return PrecisionMode::standard32;
  }
  if (text == "verify64") {
    return PrecisionMode::verify64;
  }
  throw ConfigError("unknown precision mode '" + std::string(text) + "'");
}

void ModelConfig::validate() const {
  if (vocab_size < 1 || n_blocks < 1 || d_model < 1 || n_heads < 1 || d_ff < 1) {
    throw ConfigError("model dimensions must all be at least 1");
  }
  if (seq_len < 2) {
    throw ConfigError("seq_len must be at least 2");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                      std::to_string(n_heads));
  }
}

std::size_t LayerTensorState::active_count() const {
  return static_cast<std::size_t>(std::count(mask.data().begin(), mask.data().end(), 1));
}

double LayerTensorState::sparsity() const {
  if (mask.size() == 0) {
    return 0.0;
  }
  return static_cast<double>(mask.size() - active_count()) / static_cast<double>(mask.size());
}

const LayerTensorState* ModelGraph::find_layer(std::string_view name) const {
  auto it = std::find_if(layers.begin(), layers.end(),
                         [&](const LayerTensorState& l) { return l.name == name; });
  return it == layers.end() ? nullptr : &*it;
}

LayerTensorState* ModelGraph::find_layer(std::string_view name) {
  return const_cast<LayerTensorState*>(std::as_const(*this).find_layer(name));
}

std::optional<std::size_t> ModelGraph::layer_index(std::string_view name) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].name == name) {
      return i;
    }
  }
  return std::nullopt;
}

std::size_t ModelGraph::prunable_parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) {
    n += l.weights.size();
  }
  return n;
}

std::size_t ModelGraph::dense_parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : dense) {
    n += p.values.size();
  }
  return n;
}

ForwardCapture ForwardCapture::for_model(const ModelGraph& model) {
  ForwardCapture cap;
  cap.sum_squares.reserve(model.layers.size());
  for (const auto& l : model.layers) {
    cap.sum_squares.emplace_back(l.d_in(), 0.0);
  }
  return cap;
}

// Initialization: every tensor draws from its own stream mix_seed(rng_seed, k)
// where k is its position (dense params first, then layers). Token embeddings
// ~ N(0, 1), position embeddings ~ N(0, 0.1²), norm gains = 1, projections
// ~ N(0, 1/d_in) with o_proj and down_proj further scaled by 1/sqrt(2·n_blocks).
// In standard32 mode each draw is rounded to binary32.
ModelGraph build_model(const ModelConfig& config) {
  config.validate();
  ModelGraph model;
  model.config = config;
  const auto mode = config.precision_mode;
  const std::size_t d = config.d_model;
  std::uint64_t stream = 0;

  model.dense.push_back({"tok_emb", {config.vocab_size, d},
                         gaussian_values(mix_seed(config.rng_seed, stream++),
                                         config.vocab_size * d, 1.0, mode)});
  model.dense.push_back({"pos_emb", {config.seq_len, d},
                         gaussian_values(mix_seed(config.rng_seed, stream++),
                                         config.seq_len * d, 0.1, mode)});
  for (std::size_t b = 0; b < config.n_blocks; ++b) {
    const std::string prefix = "blocks." + std::to_string(b) + ".";
    model.dense.push_back({prefix + "attn_norm", {d}, std::vector<double>(d, 1.0)});
    model.dense.push_back({prefix + "mlp_norm", {d}, std::vector<double>(d, 1.0)});
    stream += 2;
  }
  model.dense.push_back({"final_norm", {d}, std::vector<double>(d, 1.0)});
  ++stream;

  const double residual_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(config.n_blocks));
  auto add_layer = [&](std::string name, LayerRole role, std::size_t out, std::size_t in,
                       double extra_scale) {
    const double stddev = extra_scale / std::sqrt(static_cast<double>(in));
    LayerTensorState layer;
    layer.name = std::move(name);
    layer.role = role;
    layer.weights =
        Matrix(out, in, gaussian_values(mix_seed(config.rng_seed, stream++), out * in, stddev, mode));
    layer.mask = Mask(out, in, std::uint8_t{1});
    model.layers.push_back(std::move(layer));
  };
  for (std::size_t b = 0; b < config.n_blocks; ++b) {
    const std::string prefix = "blocks." + std::to_string(b) + ".";
    add_layer(prefix + "attn.q_proj", LayerRole::q_proj, d, d, 1.0);
    add_layer(prefix + "attn.k_proj", LayerRole::k_proj, d, d, 1.0);
    add_layer(prefix + "attn.v_proj", LayerRole::v_proj, d, d, 1.0);
    add_layer(prefix + "attn.o_proj", LayerRole::o_proj, d, d, residual_scale);
    add_layer(prefix + "mlp.up_proj", LayerRole::mlp_up, config.d_ff, d, 1.0);
    add_layer(prefix + "mlp.down_proj", LayerRole::mlp_down, d, config.d_ff, residual_scale);
  }
  add_layer("lm_head", LayerRole::lm_head, config.vocab_size, d, 1.0);
  return model;
}

double forward_nll(const ModelGraph& model, const TokenMatrix& batch, ForwardCapture* capture) {
  const auto s = nll_sum(model, batch, capture);
  return s.sum / static_cast<double>(s.count);
}

std::vector<Matrix> backward_weight_grads(const ModelGraph& model, const TokenMatrix& batch) {
  check_batch(model.config, batch);
  if (model.config.precision_mode == PrecisionMode::verify64) {
    return grads_impl<double>(model, batch);
  }
  return grads_impl<float>(model, batch);
}

double perplexity(const ModelGraph& model, std::span<const TokenMatrix> samples) {
  if (samples.empty()) {
    throw ShapeError("perplexity needs at least one sample");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& batch : samples) {
    const auto s = nll_sum(model, batch, nullptr);
    sum += s.sum;
    count += s.count;
  }
  return std::exp(sum / static_cast<double>(count));
}

}  // namespace agprune
