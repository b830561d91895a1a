// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// In-memory snapshots of prunable state and the on-disk container.
//
// Container layout (all integers little-endian):
//   [8]  magic "AGPRUNE\0"
//   [8]  u64 header length N
//   [N]  UTF-8 JSON header: format_version, config, ppl (+ ppl_bits), iteration,
//        tensors[] = {name, dtype, shape, offset, nbytes[, role]}
//   [..] payload; tensor offsets are relative to its start
// Weights and dense params are IEEE-754 binary32 ("f32"), or binary64 ("f64")
// for verify64 models. Masks are one byte per element ("u8", 0/1).

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "agprune/model.hpp"

namespace agprune {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct Checkpoint {
  ModelConfig config;
  std::vector<std::string> names;
  std::vector<Matrix> weights;
  std::vector<Mask> masks;
  double ppl = 0.0;
  std::size_t iteration = 0;
};

Checkpoint save_checkpoint(const ModelGraph& model, double ppl, std::size_t iteration = 0);

/// Makes every prunable weight and mask identical to the snapshot. Throws
/// ConfigError when the snapshot was taken from a differently shaped model.
void restore_checkpoint(ModelGraph& model, const Checkpoint& checkpoint);

struct StoredModel {
  ModelGraph model;
  double ppl = 0.0;
  std::size_t iteration = 0;
};

std::vector<std::uint8_t> encode_container(const ModelGraph& model, double ppl,
                                           std::size_t iteration);
StoredModel decode_container(std::span<const std::uint8_t> bytes);

void write_container(const std::filesystem::path& path, const ModelGraph& model, double ppl,
                     std::size_t iteration);
StoredModel read_container(const std::filesystem::path& path);

}  // namespace agprune
