// Copyright 2026 The StackSim Authors
// SPDX-License-Identifier: Apache-2.0

#include "stacksim/model.h"

#include <stdexcept>

namespace stacksim {

void ModelConfig::validate() const {
  if (layers < 1 || heads < 1) throw std::invalid_argument("layers and heads must be >= 1");
  if (hidden == 0 || hidden % heads != 0)
    throw std::invalid_argument("hidden must be a positive multiple of heads");
  if (kv_heads < 1 || kv_heads > heads) throw std::invalid_argument("kv_heads must be in [1, heads]");
  if (dtype_bytes < 1) throw std::invalid_argument("dtype_bytes must be >= 1");
  if (params < 0.0) throw std::invalid_argument("params must be >= 0");
}

namespace {

ModelConfig make(std::string name, uint32_t layers, uint32_t hidden, uint32_t heads,
                 double params) {
  return ModelConfig{std::move(name), layers, hidden, heads, heads, params, 2};
}

}  // namespace

ModelConfig model_preset(std::string_view name) {
  if (name == "qwen3-4b") return make("qwen3-4b", 36, 2560, 32, 4e9);
  if (name == "qwen3-32b") return make("qwen3-32b", 64, 5120, 64, 32e9);
  if (name == "devstral-123b") return make("devstral-123b", 80, 12288, 96, 123e9);
  if (name == "gpt-175b") return make("gpt-175b", 96, 12288, 96, 175e9);
  throw std::invalid_argument("unknown model preset '" + std::string(name) + "'");
}

std::vector<std::string> model_preset_names() {
  return {"qwen3-4b", "qwen3-32b", "devstral-123b", "gpt-175b"};
}

uint64_t kv_bytes_per_token(const ModelConfig& m) {
  const uint64_t full = 2ULL * m.layers * m.hidden * m.dtype_bytes;
  if (m.kv_heads == m.heads) return full;
  return full * m.kv_heads / m.heads;
}

AttentionWork decode_attention_traffic(const ModelConfig& m, uint64_t context_len) {
  AttentionWork w;
  w.bytes = context_len * kv_bytes_per_token(m);
  w.flops = 2.0 * static_cast<double>(w.bytes) / m.dtype_bytes;
  return w;
}

FcWork fc_work(const ModelConfig& m, uint64_t tokens, Phase /*phase*/) {
  if (tokens == 0) throw std::invalid_argument("fc_work needs at least one token");
  return FcWork{2.0 * m.params * static_cast<double>(tokens), weight_bytes(m)};
}

double weight_bytes(const ModelConfig& m) { return m.params * m.dtype_bytes; }

}  // namespace stacksim
