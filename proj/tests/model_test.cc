// Copyright 2026 The StackSim Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "stacksim/model.h"

namespace stacksim {
namespace {

ModelConfig geometry(uint32_t layers, uint32_t hidden, uint32_t heads, uint32_t dtype) {
  return ModelConfig{"t", layers, hidden, heads, heads, 1e9, dtype};
}

TEST(Model, PresetsMatchTableGeometry) {
  const ModelConfig q = model_preset("qwen3-4b");
  EXPECT_EQ(q.layers, 36u);
  EXPECT_EQ(q.hidden, 2560u);
  EXPECT_EQ(q.heads, 32u);
  EXPECT_DOUBLE_EQ(q.params, 4e9);
  const ModelConfig g = model_preset("gpt-175b");
  EXPECT_EQ(g.layers, 96u);
  EXPECT_EQ(g.hidden, 12288u);
  EXPECT_EQ(g.heads, 96u);
  EXPECT_EQ(g.head_dim(), 128u);
  const ModelConfig d = model_preset("devstral-123b");
  EXPECT_EQ(d.layers, 80u);
  EXPECT_EQ(model_preset("qwen3-32b").hidden, 5120u);
  for (const auto& n : model_preset_names()) {
    const ModelConfig m = model_preset(n);
    EXPECT_NO_THROW(m.validate());
    EXPECT_EQ(m.kv_heads, m.heads);
    EXPECT_EQ(m.dtype_bytes, 2u);
  }
  EXPECT_THROW(model_preset("llama"), std::invalid_argument);
}

TEST(Model, KvBytesPerTokenExamples) {
  EXPECT_EQ(kv_bytes_per_token(model_preset("qwen3-4b")), 368640u);
  EXPECT_EQ(kv_bytes_per_token(model_preset("gpt-175b")), 4718592u);
  EXPECT_EQ(kv_bytes_per_token(geometry(1, 1, 1, 1)), 2u);
}

TEST(Model, KvHeadsOverrideScales) {
  ModelConfig m = model_preset("qwen3-4b");
  m.kv_heads = 8;
  EXPECT_EQ(kv_bytes_per_token(m), 368640u / 4);
}

TEST(Model, ValidateRejectsBadGeometry) {
  EXPECT_THROW(geometry(0, 8, 1, 2).validate(), std::invalid_argument);
  EXPECT_THROW(geometry(1, 10, 3, 2).validate(), std::invalid_argument);
  ModelConfig m = geometry(1, 8, 2, 2);
  m.kv_heads = 3;
  EXPECT_THROW(m.validate(), std::invalid_argument);
}

TEST(Model, DecodeTrafficExamples) {
  const ModelConfig g = model_preset("gpt-175b");
  EXPECT_EQ(decode_attention_traffic(g, 1).bytes, kv_bytes_per_token(g));
  const AttentionWork w = decode_attention_traffic(g, 4096);
  EXPECT_EQ(w.bytes, 4096ull * 4718592ull);
  EXPECT_NEAR(static_cast<double>(w.bytes) / 1e9, 19.33, 0.01);
  EXPECT_DOUBLE_EQ(w.flops, 2.0 * static_cast<double>(w.bytes) / 2.0);
  EXPECT_EQ(decode_attention_traffic(g, 2048).bytes * 2, w.bytes);
}

TEST(Model, FcWorkExamples) {
  const ModelConfig q = model_preset("qwen3-4b");
  const FcWork one = fc_work(q, 1, Phase::kDecode);
  EXPECT_DOUBLE_EQ(one.flops, 8e9);
  EXPECT_DOUBLE_EQ(one.weight_bytes, 8e9);
  EXPECT_THROW(fc_work(q, 0, Phase::kDecode), std::invalid_argument);
  EXPECT_DOUBLE_EQ(fc_work(q, 1024, Phase::kPrefill).flops, 1024 * one.flops);
  EXPECT_DOUBLE_EQ(weight_bytes(q), 8e9);
}

TEST(ModelProperty, KvBytesMonotone) {
  std::mt19937 rng(3);
  std::uniform_int_distribution<uint32_t> u(1, 64);
  for (int i = 0; i < 500; ++i) {
    const uint32_t L = u(rng), h = u(rng), b = u(rng) % 4 + 1;
    const uint64_t base = kv_bytes_per_token(geometry(L, h, 1, b));
    EXPECT_LT(base, kv_bytes_per_token(geometry(L + 1, h, 1, b)));
    EXPECT_LT(base, kv_bytes_per_token(geometry(L, h + 1, 1, b)));
    EXPECT_LT(base, kv_bytes_per_token(geometry(L, h, 1, b + 1)));
  }
}

TEST(ModelProperty, DecodeTrafficLinear) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<uint64_t> u(1, 1 << 20);
  for (const auto& n : model_preset_names()) {
    const ModelConfig m = model_preset(n);
    for (int i = 0; i < 200; ++i) {
      const uint64_t a = u(rng), b = u(rng);
      EXPECT_EQ(decode_attention_traffic(m, a + b).bytes,
                decode_attention_traffic(m, a).bytes + decode_attention_traffic(m, b).bytes);
    }
  }
}

}  // namespace
}  // namespace stacksim
