// Copyright 2026 The StackSim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace stacksim {

struct ModelConfig {
  std::string name;
  uint32_t layers = 1;
  uint32_t hidden = 1;
  uint32_t heads = 1;
  // KV heads; equal to `heads` for multi-head attention. Smaller values
  // scale the KV footprint by kv_heads / heads.
  uint32_t kv_heads = 1;
  double params = 0.0;
  uint32_t dtype_bytes = 2;

  uint32_t head_dim() const { return hidden / heads; }
  void validate() const;
};

// Table presets: "qwen3-4b", "qwen3-32b", "devstral-123b", "gpt-175b".
ModelConfig model_preset(std::string_view name);
std::vector<std::string> model_preset_names();

// K and V for every layer of one token.
uint64_t kv_bytes_per_token(const ModelConfig& m);

struct AttentionWork {
  uint64_t bytes = 0;
  double flops = 0.0;
};

// One decode step re-reads the whole context: one MAC per KV element.
AttentionWork decode_attention_traffic(const ModelConfig& m, uint64_t context_len);

enum class Phase { kPrefill, kDecode };

struct FcWork {
  double flops = 0.0;
  double weight_bytes = 0.0;
};

// Dense roofline approximation: 2 * params FLOPs per token, one weight pass.
FcWork fc_work(const ModelConfig& m, uint64_t tokens, Phase phase);

double weight_bytes(const ModelConfig& m);

}  // namespace stacksim
