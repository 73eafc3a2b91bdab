// Copyright 2026 The StackSim Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "stacksim/stack.h"

namespace stacksim {
namespace {

TEST(Stack, TotalCapacityExamples) {
  StackConfig s;
  s.C = 4;
  s.B_full = 8e9;
  s.P = 4;
  s.B_half = 4e9;
  EXPECT_DOUBLE_EQ(total_capacity(s), 48e9);
  s.P = 0;
  EXPECT_DOUBLE_EQ(total_capacity(s), 32e9);
  EXPECT_DOUBLE_EQ(compute_capacity(s), 0.0);
}

TEST(Stack, PresetsMatchPerCardTable) {
  struct Row {
    Mode mode;
    double comp, cap;
  };
  for (const Row& r : {Row{Mode::kTokenStack, 20e9, 40e9}, Row{Mode::kAttAcc, 32e9, 16e9},
                       Row{Mode::kFullGPU, 80e9, 0.0}, Row{Mode::kUniform, 40e9, 0.0}}) {
    const NodeTopology t = topology_preset(r.mode);
    EXPECT_EQ(t.mode, r.mode);
    EXPECT_EQ(t.gpus, 8u);
    EXPECT_EQ(t.stacks_per_gpu, 5u);
    EXPECT_NEAR(t.comp_capacity_per_card, r.comp, 1.0) << to_string(r.mode);
    EXPECT_NEAR(t.cap_capacity_per_card, r.cap, 1.0) << to_string(r.mode);
    EXPECT_NO_THROW(t.validate());
  }
}

TEST(Stack, TokenStackSplitKeepsEightLayers) {
  const NodeTopology t = tokenstack_split(1, 7);
  EXPECT_EQ(t.stack.C, 1u);
  EXPECT_EQ(t.stack.P, 7u);
  EXPECT_DOUBLE_EQ(t.comp_capacity_per_card, 5 * 7 * 1e9);
  EXPECT_DOUBLE_EQ(t.cap_capacity_per_card, 5 * 1 * 2e9);
  EXPECT_THROW(tokenstack_split(0, 0), std::invalid_argument);
}

TEST(Stack, ModeNames) {
  for (Mode m : {Mode::kTokenStack, Mode::kAttAcc, Mode::kFullGPU, Mode::kUniform})
    EXPECT_EQ(parse_mode(to_string(m)), m);
  EXPECT_EQ(parse_mode("attacc"), Mode::kAttAcc);
  EXPECT_THROW(parse_mode("hbm"), std::invalid_argument);
}

TEST(Stack, LinkBandwidths) {
  const NodeTopology t = topology_preset(Mode::kTokenStack);
  EXPECT_DOUBLE_EQ(link_bandwidth(LinkPath::kTsv, t), 896e9);
  EXPECT_DOUBLE_EQ(link_bandwidth(LinkPath::kUcie, t), 512e9);
  EXPECT_DOUBLE_EQ(link_bandwidth(LinkPath::kNvlink, t), 600e9);
  EXPECT_DOUBLE_EQ(link_bandwidth(LinkPath::kXbar, t), 512e9);
  NodeTopology x = t;
  x.xbar_bw = 1e12;
  EXPECT_DOUBLE_EQ(link_bandwidth(LinkPath::kXbar, x), 1e12);
}

TEST(Stack, ValidationRejectsBadConfigs) {
  StackConfig s;
  s.C = 0;
  s.P = 0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = StackConfig{};
  s.tsv_bw = 0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = StackConfig{};
  s.B = 0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  NodeTopology t;
  t.gpus = 0;
  EXPECT_THROW(t.validate(), std::invalid_argument);
}

TEST(Stack, CapacityPageBankExamples) {
  EXPECT_EQ(capacity_page_bank(0, 64), 0u);
  EXPECT_EQ(capacity_page_bank(64, 64), 0u);
  EXPECT_EQ(capacity_page_bank(65, 64), 1u);
}

TEST(StackProperty, InterleaveBalanced) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<uint32_t> bc(1, 128);
  std::uniform_int_distribution<uint64_t> start(0, 1 << 20), len(1, 5000);
  for (int i = 0; i < 500; ++i) {
    const uint32_t B_cap = bc(rng);
    const uint64_t s = start(rng), n = len(rng);
    std::vector<uint64_t> count(B_cap, 0);
    for (uint64_t p = s; p < s + n; ++p) ++count[capacity_page_bank(p, B_cap)];
    const auto [lo, hi] = std::minmax_element(count.begin(), count.end());
    EXPECT_LE(*hi - *lo, 1u);
    if (n % B_cap == 0) {
      EXPECT_EQ(*hi, *lo);
    }
  }
}

TEST(Stack, KvBudgetWeightsFillCapacityFirst) {
  const ModelConfig q = model_preset("qwen3-4b");
  const KvBudget ts = kv_budget(topology_preset(Mode::kTokenStack), q);
  EXPECT_FALSE(ts.oom);
  EXPECT_DOUBLE_EQ(ts.weights_per_card, 1e9);
  EXPECT_NEAR(ts.compute_kv, 20e9, 1.0);
  EXPECT_NEAR(ts.capacity_kv, 39e9, 1.0);

  const ModelConfig g = model_preset("gpt-175b");
  const KvBudget tg = kv_budget(topology_preset(Mode::kTokenStack), g);
  EXPECT_FALSE(tg.oom);
  EXPECT_DOUBLE_EQ(tg.capacity_kv, 0.0);
  EXPECT_NEAR(tg.compute_kv, 60e9 - 43.75e9, 1.0);
}

TEST(Stack, UniformGpt175bIsOom) {
  EXPECT_TRUE(kv_budget(topology_preset(Mode::kUniform), model_preset("gpt-175b")).oom);
  EXPECT_FALSE(kv_budget(topology_preset(Mode::kUniform), model_preset("qwen3-4b")).oom);
}

TEST(Stack, TranslateFollowsMoves) {
  StackConfig s;
  ResidencyTable rt(s);
  EXPECT_FALSE(rt.translate(42).has_value());
  rt.place(42, 1, 2, LayerKind::kCompute);
  auto loc = rt.translate(42);
  ASSERT_TRUE(loc);
  EXPECT_EQ(loc->layer_kind, LayerKind::kCompute);
  EXPECT_EQ(loc->card, 1u);
  EXPECT_LT(loc->bank, s.B);

  rt.place(42, 1, 2, LayerKind::kCapacity);
  loc = rt.translate(42);
  EXPECT_EQ(loc->layer_kind, LayerKind::kCapacity);
  EXPECT_EQ(loc->bank, capacity_page_bank(loc->page_offset, s.B_cap));

  rt.place(42, 1, 2, LayerKind::kCompute);
  EXPECT_EQ(rt.translate(42)->layer_kind, LayerKind::kCompute);
  EXPECT_EQ(rt.size(), 1u);
  rt.erase(42);
  EXPECT_FALSE(rt.contains(42));
}

TEST(Stack, ReplicasNeverDuplicatePrimary) {
  ResidencyTable rt(StackConfig{});
  EXPECT_FALSE(rt.add_replica(7, 0, 0));
  rt.place(7, 0, 0, LayerKind::kCompute);
  EXPECT_FALSE(rt.add_replica(7, 0, 1));
  EXPECT_TRUE(rt.add_replica(7, 3, 1));
  EXPECT_FALSE(rt.add_replica(7, 3, 2));
  EXPECT_EQ(rt.replicas(7).size(), 1u);
  // Moving the primary onto a replica's card absorbs that replica.
  rt.place(7, 3, 0, LayerKind::kCompute);
  EXPECT_TRUE(rt.replicas(7).empty());
  EXPECT_TRUE(rt.add_replica(7, 5, 0));
  EXPECT_TRUE(rt.remove_replica(7, 5));
  EXPECT_FALSE(rt.remove_replica(7, 5));
}

TEST(StackProperty, TranslationIsAFunction) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> op(0, 3), card(0, 7), id(0, 49);
  ResidencyTable rt(StackConfig{});
  for (int i = 0; i < 20000; ++i) {
    const uint64_t b = id(rng);
    const uint32_t c = card(rng);
    switch (op(rng)) {
      case 0: rt.place(b, c, c % 5, LayerKind::kCompute); break;
      case 1: rt.place(b, c, c % 5, LayerKind::kCapacity); break;
      case 2: rt.add_replica(b, c, c % 5); break;
      case 3: rt.remove_replica(b, c); break;
    }
    if (auto p = rt.translate(b)) {
      std::vector<uint32_t> cards{p->card};
      for (const auto& r : rt.replicas(b)) {
        EXPECT_EQ(r.layer_kind, LayerKind::kCompute);
        cards.push_back(r.card);
      }
      std::sort(cards.begin(), cards.end());
      EXPECT_EQ(std::adjacent_find(cards.begin(), cards.end()), cards.end());
    }
  }
}

}  // namespace
}  // namespace stacksim
