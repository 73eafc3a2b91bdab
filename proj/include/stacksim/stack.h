// Copyright 2026 The StackSim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "stacksim/model.h"

namespace stacksim {

enum class Mode : uint8_t { kTokenStack, kAttAcc, kFullGPU, kUniform };

std::string_view to_string(Mode m);
// Case-insensitive: "tokenstack", "attacc", "fullgpu", "uniform".
Mode parse_mode(std::string_view s);

struct StackConfig {
  uint32_t C = 4;             // capacity layers
  uint32_t P = 4;             // compute (PIM) layers
  double B_full = 2e9;        // bytes per capacity layer
  double B_half = 1e9;        // bytes per compute layer
  uint32_t B = 256;           // PIM banks across compute layers
  uint32_t B_cap = 64;        // capacity-layer banks
  double tsv_bw = 896e9;
  double ucie_bw = 512e9;
  double quant_engine_bw = 896e9;

  void validate() const;
};

double total_capacity(const StackConfig& s);
double compute_capacity(const StackConfig& s);
double capacity_tier_capacity(const StackConfig& s);

struct NodeTopology {
  uint32_t gpus = 8;
  uint32_t stacks_per_gpu = 5;
  StackConfig stack;
  double nvlink_bw = 600e9;
  double gpu_flops = 312e12;
  // Host spill path used when a lone request outgrows its card.
  double pcie_bw = 32e9;
  // Intra-package crossbar; 0 means one stack's UCIe bandwidth.
  double xbar_bw = 0.0;
  Mode mode = Mode::kTokenStack;
  double comp_capacity_per_card = 20e9;
  double cap_capacity_per_card = 40e9;

  void validate() const;
};

// Per-mode presets. Per-card capacities follow the published table and the
// stack layer counts divide them evenly across stacks_per_gpu.
NodeTopology topology_preset(Mode mode);
// TokenStack with `cap` capacity and `comp` compute layers per stack.
NodeTopology tokenstack_split(uint32_t cap, uint32_t comp);

enum class LinkPath : uint8_t { kTsv, kUcie, kXbar, kNvlink, kPcie };
std::string_view to_string(LinkPath p);
double link_bandwidth(LinkPath path, const NodeTopology& topo);

enum class LayerKind : uint8_t { kCompute, kCapacity };

struct PhysicalLocation {
  uint32_t card = 0;
  uint32_t stack = 0;
  LayerKind layer_kind = LayerKind::kCompute;
  uint32_t bank = 0;
  uint64_t page_offset = 0;

  bool operator==(const PhysicalLocation&) const = default;
};

inline uint32_t capacity_page_bank(uint64_t page, uint32_t B_cap) {
  return static_cast<uint32_t>(page % B_cap);
}

// KV bytes left per card once weights are reserved. Weights fill the
// capacity domain first and overflow into the compute domain.
struct KvBudget {
  double weights_per_card = 0.0;
  double compute_kv = 0.0;
  double capacity_kv = 0.0;
  bool oom = false;
};

KvBudget kv_budget(const NodeTopology& topo, const ModelConfig& model);

// Logical block -> physical location. One primary plus optional replicas
// on other cards.
class ResidencyTable {
 public:
  explicit ResidencyTable(const StackConfig& s) : B_(s.B), B_cap_(s.B_cap) {}

  // Registers or moves the primary copy. Pages are handed out per
  // (card, stack, kind) in allocation order; the bank follows the page.
  const PhysicalLocation& place(uint64_t block, uint32_t card, uint32_t stack, LayerKind kind);
  bool add_replica(uint64_t block, uint32_t card, uint32_t stack);
  bool remove_replica(uint64_t block, uint32_t card);
  void erase(uint64_t block);

  std::optional<PhysicalLocation> translate(uint64_t block) const;
  std::vector<PhysicalLocation> replicas(uint64_t block) const;
  bool contains(uint64_t block) const { return entries_.count(block) != 0; }
  size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    PhysicalLocation primary;
    std::vector<PhysicalLocation> replicas;
  };
  PhysicalLocation allocate(uint32_t card, uint32_t stack, LayerKind kind);

  uint32_t B_;
  uint32_t B_cap_;
  std::unordered_map<uint64_t, Entry> entries_;
  std::map<std::tuple<uint32_t, uint32_t, LayerKind>, uint64_t> next_page_;
};

}  // namespace stacksim
