// Copyright 2026 The StackSim Authors
// SPDX-License-Identifier: Apache-2.0

#include "stacksim/stack.h"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace stacksim {

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::kTokenStack: return "TokenStack";
    case Mode::kAttAcc: return "AttAcc";
    case Mode::kFullGPU: return "FullGPU";
    case Mode::kUniform: return "Uniform";
  }
  return "?";
}

Mode parse_mode(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "tokenstack") return Mode::kTokenStack;
  if (lower == "attacc") return Mode::kAttAcc;
  if (lower == "fullgpu") return Mode::kFullGPU;
  if (lower == "uniform") return Mode::kUniform;
  throw std::invalid_argument("unknown mode '" + std::string(s) + "'");
}

void StackConfig::validate() const {
  if (C + P < 1) throw std::invalid_argument("stack needs at least one layer");
  if (tsv_bw <= 0 || ucie_bw <= 0 || quant_engine_bw <= 0)
    throw std::invalid_argument("stack bandwidths must be positive");
  if (P >= 1 && B < 1) throw std::invalid_argument("B must be >= 1 with compute layers");
  if (B_cap < 1) throw std::invalid_argument("B_cap must be >= 1");
  if (B_full < 0 || B_half < 0) throw std::invalid_argument("layer sizes must be >= 0");
}

double total_capacity(const StackConfig& s) { return s.C * s.B_full + s.P * s.B_half; }
double compute_capacity(const StackConfig& s) { return s.P * s.B_half; }
double capacity_tier_capacity(const StackConfig& s) { return s.C * s.B_full; }

void NodeTopology::validate() const {
  stack.validate();
  if (gpus < 1) throw std::invalid_argument("gpus must be >= 1");
  if (stacks_per_gpu < 1) throw std::invalid_argument("stacks_per_gpu must be >= 1");
  if (nvlink_bw <= 0 || gpu_flops <= 0 || pcie_bw <= 0 || xbar_bw < 0)
    throw std::invalid_argument("topology rates must be positive");
  if (comp_capacity_per_card < 0 || cap_capacity_per_card < 0)
    throw std::invalid_argument("per-card capacities must be >= 0");
}

namespace {

NodeTopology with_stack(Mode mode, uint32_t C, double b_full, uint32_t P, double b_half) {
  NodeTopology t;
  t.mode = mode;
  t.stack.C = C;
  t.stack.B_full = b_full;
  t.stack.P = P;
  t.stack.B_half = b_half;
  t.comp_capacity_per_card = t.stacks_per_gpu * compute_capacity(t.stack);
  t.cap_capacity_per_card = t.stacks_per_gpu * capacity_tier_capacity(t.stack);
  return t;
}

}  // namespace

NodeTopology topology_preset(Mode mode) {
  switch (mode) {
    case Mode::kTokenStack: return with_stack(mode, 4, 2e9, 4, 1e9);
    // AttAcc: 32 GB of PIM for attention next to 16 GB of plain HBM.
    case Mode::kAttAcc: return with_stack(mode, 2, 1.6e9, 6, 32e9 / 30.0);
    case Mode::kFullGPU: {
      // Plain HBM; the whole card is one GPU-visible KV domain.
      NodeTopology t = with_stack(mode, 8, 2e9, 0, 0.0);
      t.comp_capacity_per_card = t.cap_capacity_per_card;
      t.cap_capacity_per_card = 0.0;
      return t;
    }
    case Mode::kUniform: return with_stack(mode, 0, 0.0, 8, 1e9);
  }
  throw std::invalid_argument("unknown mode");
}

NodeTopology tokenstack_split(uint32_t cap, uint32_t comp) {
  if (cap + comp < 1) throw std::invalid_argument("split needs at least one layer");
  return with_stack(Mode::kTokenStack, cap, 2e9, comp, 1e9);
}

std::string_view to_string(LinkPath p) {
  switch (p) {
    case LinkPath::kTsv: return "tsv";
    case LinkPath::kUcie: return "ucie";
    case LinkPath::kXbar: return "xbar";
    case LinkPath::kNvlink: return "nvlink";
    case LinkPath::kPcie: return "pcie";
  }
  return "?";
}

double link_bandwidth(LinkPath path, const NodeTopology& topo) {
  switch (path) {
    case LinkPath::kTsv: return topo.stack.tsv_bw;
    case LinkPath::kUcie: return topo.stack.ucie_bw;
    case LinkPath::kXbar: return topo.xbar_bw > 0 ? topo.xbar_bw : topo.stack.ucie_bw;
    case LinkPath::kNvlink: return topo.nvlink_bw;
    case LinkPath::kPcie: return topo.pcie_bw;
  }
  throw std::invalid_argument("unknown link path");
}

KvBudget kv_budget(const NodeTopology& topo, const ModelConfig& model) {
  KvBudget b;
  b.weights_per_card = weight_bytes(model) / topo.gpus;
  const double cap = topo.cap_capacity_per_card;
  const double comp = topo.comp_capacity_per_card;
  if (b.weights_per_card > cap + comp) {
    b.oom = true;
    return b;
  }
  const double spill = std::max(0.0, b.weights_per_card - cap);
  b.capacity_kv = std::max(0.0, cap - b.weights_per_card);
  b.compute_kv = comp - spill;
  return b;
}

PhysicalLocation ResidencyTable::allocate(uint32_t card, uint32_t stack, LayerKind kind) {
  uint64_t& next = next_page_[{card, stack, kind}];
  PhysicalLocation loc{card, stack, kind, 0, next};
  loc.bank = kind == LayerKind::kCapacity ? capacity_page_bank(next, B_cap_)
                                          : static_cast<uint32_t>(next % B_);
  ++next;
  return loc;
}

const PhysicalLocation& ResidencyTable::place(uint64_t block, uint32_t card, uint32_t stack,
                                              LayerKind kind) {
  Entry& e = entries_[block];
  e.primary = allocate(card, stack, kind);
  std::erase_if(e.replicas, [card](const PhysicalLocation& r) { return r.card == card; });
  return e.primary;
}

bool ResidencyTable::add_replica(uint64_t block, uint32_t card, uint32_t stack) {
  auto it = entries_.find(block);
  if (it == entries_.end()) return false;
  Entry& e = it->second;
  if (e.primary.card == card) return false;
  for (const auto& r : e.replicas)
    if (r.card == card) return false;
  e.replicas.push_back(allocate(card, stack, LayerKind::kCompute));
  return true;
}

bool ResidencyTable::remove_replica(uint64_t block, uint32_t card) {
  auto it = entries_.find(block);
  if (it == entries_.end()) return false;
  return std::erase_if(it->second.replicas,
                       [card](const PhysicalLocation& r) { return r.card == card; }) > 0;
}

void ResidencyTable::erase(uint64_t block) { entries_.erase(block); }

std::optional<PhysicalLocation> ResidencyTable::translate(uint64_t block) const {
  auto it = entries_.find(block);
  if (it == entries_.end()) return std::nullopt;
  return it->second.primary;
}

std::vector<PhysicalLocation> ResidencyTable::replicas(uint64_t block) const {
  auto it = entries_.find(block);
  if (it == entries_.end()) return {};
  return it->second.replicas;
}

}  // namespace stacksim
