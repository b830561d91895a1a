// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "agprune/common.hpp"

namespace agprune {

enum class CorpusSource { text_file, synthetic };

struct Corpus {
  std::vector<std::vector<std::uint32_t>> samples;
  CorpusSource source = CorpusSource::synthetic;
  std::uint64_t seed = 0;
  std::size_t seq_len = 0;
};

struct SampleSplit {
  std::vector<std::size_t> activation_set;
  std::vector<std::size_t> gradient_set;
  std::vector<std::size_t> ppl_set;
};

/// Byte-level tokens (vocab 256). Each sample is a seq_len window starting at
/// a uniformly drawn offset in [0, size - seq_len].
Corpus load_text_corpus(const std::filesystem::path& path, std::size_t seq_len,
                        std::size_t n_samples, std::uint64_t seed);

/// Zipf-Markov generator. Token id r has unigram weight 1/(r+1)^1.1. The first
/// token of a sample is a Zipf draw; each later token is, with probability 1/2,
/// a fresh Zipf draw and otherwise a Zipf draw restricted to the bucket
/// {r : r mod B == prev mod B} with B = min(16, vocab). The restricted kernel
/// leaves the Zipf distribution stationary, so unigram frequencies still
/// decrease with rank while successive tokens are correlated.
Corpus synth_corpus(std::uint64_t seed, std::size_t vocab, std::size_t seq_len,
                    std::size_t n_samples);

/// Each set is drawn without replacement by a partial Fisher-Yates shuffle
/// on its own derived stream; the three sets may overlap.
SampleSplit make_split(const Corpus& corpus, std::size_t n_act, std::size_t n_grad,
                       std::size_t n_ppl, std::uint64_t seed);

/// Stacks the selected samples into one token matrix (one row per sample).
TokenMatrix gather_batch(const Corpus& corpus, std::span<const std::size_t> indices);

}  // namespace agprune
