// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "agprune/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "agprune/config.hpp"

namespace agprune {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'A', 'G', 'P', 'R', 'U', 'N', 'E', '\0'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(in[at + i]) << (8 * i);
  }
  return v;
}

void put_f32(std::vector<std::uint8_t>& out, double value) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
}

void put_f64(std::vector<std::uint8_t>& out, double value) {
  put_u64(out, std::bit_cast<std::uint64_t>(value));
}

std::vector<double> get_reals(std::span<const std::uint8_t> in, std::size_t at, std::size_t n,
                              bool wide) {
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (wide) {
      v[k] = std::bit_cast<double>(get_u64(in, at + 8 * k));
    } else {
      std::uint32_t bits = 0;
      for (int i = 0; i < 4; ++i) {
        bits |= static_cast<std::uint32_t>(in[at + 4 * k + i]) << (8 * i);
      }
      v[k] = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  return v;
}

std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto s : shape) {
    n *= s;
  }
  return n;
}

}  // namespace

Checkpoint save_checkpoint(const ModelGraph& model, double ppl, std::size_t iteration) {
  Checkpoint cp;
  cp.config = model.config;
  cp.ppl = ppl;
  cp.iteration = iteration;
  for (const auto& layer : model.layers) {
    cp.names.push_back(layer.name);
    cp.weights.push_back(layer.weights);
    cp.masks.push_back(layer.mask);
  }
  return cp;
}

void restore_checkpoint(ModelGraph& model, const Checkpoint& checkpoint) {
  if (!(checkpoint.config == model.config) || checkpoint.names.size() != model.layers.size()) {
    throw ConfigError("checkpoint was taken from a model with a different configuration");
  }
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    auto& layer = model.layers[i];
    if (layer.name != checkpoint.names[i] || !layer.weights.same_shape(checkpoint.weights[i]) ||
        !layer.mask.same_shape(checkpoint.masks[i])) {
      throw ConfigError("checkpoint layer '" + checkpoint.names[i] + "' does not match model");
    }
  }
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    model.layers[i].weights = checkpoint.weights[i];
    model.layers[i].mask = checkpoint.masks[i];
  }
}

std::vector<std::uint8_t> encode_container(const ModelGraph& model, double ppl,
                                           std::size_t iteration) {
  const bool wide = model.config.precision_mode == PrecisionMode::verify64;
  const std::string real_dtype = wide ? "f64" : "f32";
  const std::size_t real_size = wide ? 8 : 4;

  std::vector<std::uint8_t> payload;
  json tensors = json::array();
  auto add_reals = [&](const std::string& name, const std::vector<std::size_t>& shape,
                       const std::vector<double>& values, const char* role) {
    json entry = {{"name", name},
                  {"dtype", real_dtype},
                  {"shape", shape},
                  {"offset", payload.size()},
                  {"nbytes", values.size() * real_size}};
    if (role) {
      entry["role"] = role;
    }
    tensors.push_back(std::move(entry));
    for (double v : values) {
      wide ? put_f64(payload, v) : put_f32(payload, v);
    }
  };

  for (const auto& p : model.dense) {
    add_reals("dense/" + p.name, p.shape, p.values, nullptr);
  }
  for (const auto& layer : model.layers) {
    const std::vector<std::size_t> shape{layer.d_out(), layer.d_in()};
    add_reals("weight/" + layer.name, shape, layer.weights.data(),
              std::string(to_string(layer.role)).c_str());
    tensors.push_back({{"name", "mask/" + layer.name},
                       {"dtype", "u8"},
                       {"shape", shape},
                       {"offset", payload.size()},
                       {"nbytes", layer.mask.size()}});
    payload.insert(payload.end(), layer.mask.data().begin(), layer.mask.data().end());
  }

  const json header = {{"format_version", kCheckpointFormatVersion},
                       {"config", model_config_to_json(model.config)},
                       {"ppl", ppl},
                       {"ppl_bits", std::bit_cast<std::uint64_t>(ppl)},
                       {"iteration", iteration},
                       {"tensors", std::move(tensors)}};
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

StoredModel decode_container(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw IoError("not a checkpoint container (bad magic)");
  }
  const std::uint64_t header_len = get_u64(bytes, 8);
  if (header_len > bytes.size() - 16) {
    throw IoError("checkpoint header length exceeds file size");
  }
  json header;
  try {
    header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<long>(header_len));
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  if (header.value("format_version", 0u) != kCheckpointFormatVersion) {
    throw IoError("unsupported checkpoint format version");
  }
  const auto payload = bytes.subspan(16 + header_len);

  StoredModel stored;
  stored.model = build_model(model_config_from_json(header.at("config")));
  stored.ppl = std::bit_cast<double>(header.at("ppl_bits").get<std::uint64_t>());
  stored.iteration = header.at("iteration").get<std::size_t>();
  const bool wide = stored.model.config.precision_mode == PrecisionMode::verify64;

  std::size_t seen = 0;
  for (const auto& entry : header.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto dtype = entry.at("dtype").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto nbytes = entry.at("nbytes").get<std::size_t>();
    const std::size_t n = element_count(shape);
    const std::size_t width = dtype == "u8" ? 1 : dtype == "f64" ? 8 : dtype == "f32" ? 4 : 0;
    if (width == 0 || (dtype != "u8" && (dtype == "f64") != wide)) {
      throw IoError("tensor '" + name + "' has unexpected dtype " + dtype);
    }
    if (nbytes != n * width || offset > payload.size() || nbytes > payload.size() - offset) {
      throw IoError("tensor '" + name + "' payload is out of bounds");
    }

    const auto slash = name.find('/');
    const std::string kind = name.substr(0, slash);
    const std::string key = slash == std::string::npos ? "" : name.substr(slash + 1);
    if (kind == "dense") {
      auto it = std::find_if(stored.model.dense.begin(), stored.model.dense.end(),
                             [&](const DenseParam& p) { return p.name == key; });
      if (it == stored.model.dense.end() || it->shape != shape) {
        throw IoError("unexpected dense tensor '" + key + "'");
      }
      it->values = get_reals(payload, offset, n, wide);
    } else if (kind == "weight" || kind == "mask") {
      auto* layer = stored.model.find_layer(key);
      if (!layer || shape.size() != 2 || shape[0] != layer->d_out() || shape[1] != layer->d_in()) {
        throw IoError("unexpected layer tensor '" + name + "'");
      }
      if (kind == "weight") {
        layer->weights = Matrix(shape[0], shape[1], get_reals(payload, offset, n, wide));
      } else {
        if (dtype != "u8") {
          throw IoError("mask '" + key + "' must be u8");
        }
        std::vector<std::uint8_t> m(payload.begin() + static_cast<long>(offset),
                                    payload.begin() + static_cast<long>(offset + n));
        for (auto b : m) {
          if (b > 1) {
            throw IoError("mask '" + key + "' holds a value other than 0/1");
          }
        }
        layer->mask = Mask(shape[0], shape[1], std::move(m));
      }
    } else {
      throw IoError("unknown tensor '" + name + "'");
    }
    ++seen;
  }
  if (seen != stored.model.dense.size() + 2 * stored.model.layers.size()) {
    throw IoError("checkpoint is missing tensors");
  }
  return stored;
}

void write_container(const std::filesystem::path& path, const ModelGraph& model, double ppl,
                     std::size_t iteration) {
  const auto bytes = encode_container(model, ppl, iteration);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("failed writing '" + path.string() + "'");
  }
}

StoredModel read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "'");
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_container(bytes);
}

}  // namespace agprune
