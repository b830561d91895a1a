// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "agprune/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

namespace agprune {

namespace {

constexpr double kZipfExponent = 1.1;
constexpr double kFreshDrawProbability = 0.5;
constexpr std::size_t kMaxBuckets = 16;

// Inverse-CDF sampler over a fixed weight table.
class Categorical {
 public:
  Categorical() = default;
  explicit Categorical(std::vector<double> weights) : cdf_(weights.size()) {
    std::partial_sum(weights.begin(), weights.end(), cdf_.begin());
    tokens_.resize(weights.size());
    std::iota(tokens_.begin(), tokens_.end(), 0u);
  }
  Categorical(std::vector<double> weights, std::vector<std::uint32_t> tokens)
      : Categorical(std::move(weights)) {
    tokens_ = std::move(tokens);
  }

  std::uint32_t draw(Rng& rng) const {
    const double u = rng.uniform() * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) {
      --it;
    }
    return tokens_[static_cast<std::size_t>(it - cdf_.begin())];
  }

 private:
  std::vector<double> cdf_;
  std::vector<std::uint32_t> tokens_;
};

std::vector<std::size_t> draw_without_replacement(std::size_t population, std::size_t count,
                                                  std::uint64_t seed) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(population - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

}  // namespace

Corpus load_text_corpus(const std::filesystem::path& path, std::size_t seq_len,
                        std::size_t n_samples, std::uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot read corpus file '" + path.string() + "'");
  }
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.empty()) {
    throw ConfigError("corpus file '" + path.string() + "' is empty");
  }
  if (seq_len == 0 || bytes.size() < seq_len) {
    throw ConfigError("corpus file '" + path.string() + "' has " + std::to_string(bytes.size()) +
                      " bytes, fewer than seq_len " + std::to_string(seq_len));
  }
  Corpus corpus;
  corpus.source = CorpusSource::text_file;
  corpus.seed = seed;
  corpus.seq_len = seq_len;
  Rng rng(seed);
  const std::size_t positions = bytes.size() - seq_len + 1;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto start = static_cast<std::size_t>(rng.below(positions));
    corpus.samples.emplace_back(bytes.begin() + static_cast<long>(start),
                                bytes.begin() + static_cast<long>(start + seq_len));
  }
  return corpus;
}

Corpus synth_corpus(std::uint64_t seed, std::size_t vocab, std::size_t seq_len,
                    std::size_t n_samples) {
  if (vocab < 2) {
    throw ConfigError("synthetic corpus needs vocab >= 2");
  }
  if (seq_len == 0) {
    throw ConfigError("synthetic corpus needs seq_len >= 1");
  }
  std::vector<double> weights(vocab);
  for (std::size_t r = 0; r < vocab; ++r) {
    weights[r] = std::pow(static_cast<double>(r + 1), -kZipfExponent);
  }
  const Categorical unigram(weights);
  const std::size_t buckets = std::min(kMaxBuckets, vocab);
  std::vector<Categorical> bucket_draw(buckets);
  for (std::size_t b = 0; b < buckets; ++b) {
    std::vector<double> w;
    std::vector<std::uint32_t> ids;
    for (std::size_t r = b; r < vocab; r += buckets) {
      w.push_back(weights[r]);
      ids.push_back(static_cast<std::uint32_t>(r));
    }
    bucket_draw[b] = Categorical(std::move(w), std::move(ids));
  }

  Corpus corpus;
  corpus.source = CorpusSource::synthetic;
  corpus.seed = seed;
  corpus.seq_len = seq_len;
  Rng rng(seed);
  corpus.samples.reserve(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    std::vector<std::uint32_t> sample(seq_len);
    sample[0] = unigram.draw(rng);
    for (std::size_t t = 1; t < seq_len; ++t) {
      if (rng.uniform() < kFreshDrawProbability) {
        sample[t] = unigram.draw(rng);
      } else {
        sample[t] = bucket_draw[sample[t - 1] % buckets].draw(rng);
      }
    }
    corpus.samples.push_back(std::move(sample));
  }
  return corpus;
}

SampleSplit make_split(const Corpus& corpus, std::size_t n_act, std::size_t n_grad,
                       std::size_t n_ppl, std::uint64_t seed) {
  const std::size_t n = corpus.samples.size();
  if (n_act > n || n_grad > n || n_ppl > n) {
    throw ConfigError("split sizes (" + std::to_string(n_act) + ", " + std::to_string(n_grad) +
                      ", " + std::to_string(n_ppl) + ") exceed corpus size " + std::to_string(n));
  }
  SampleSplit split;
  split.activation_set = draw_without_replacement(n, n_act, mix_seed(seed, 0));
  split.gradient_set = draw_without_replacement(n, n_grad, mix_seed(seed, 1));
  split.ppl_set = draw_without_replacement(n, n_ppl, mix_seed(seed, 2));
  return split;
}

TokenMatrix gather_batch(const Corpus& corpus, std::span<const std::size_t> indices) {
  if (indices.empty()) {
    throw ShapeError("cannot gather an empty batch");
  }
  const std::size_t width = corpus.samples.at(indices.front()).size();
  TokenMatrix batch(indices.size(), width);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& sample = corpus.samples.at(indices[r]);
    if (sample.size() != width) {
      throw ShapeError("corpus samples have differing lengths");
    }
    std::copy(sample.begin(), sample.end(), batch.row(r).begin());
  }
  return batch;
}

}  // namespace agprune
