// Copyright 2026 The StackSim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "stacksim/stack.h"
#include "stacksim/trace.h"

namespace stacksim {

enum class Tier : uint8_t { kCompute, kCapacity, kEvicted };

struct BlockMeta {
  uint64_t id = 0;
  Category category = Category::kApi;
  double t_last = 0.0;
  uint32_t offset = 0;  // token position within its prompt
  uint32_t n_remote = 0;
  uint32_t n_cards = 0;
  uint32_t home_card = 0;
  uint32_t home_stack = 0;
  Tier tier = Tier::kCompute;
  bool quantized = false;
  uint64_t bytes_fp16 = 0;
};

struct CategoryModel {
  Category category = Category::kApi;
  double lambda = 1.0 / 60.0;
  double lifespan = 60.0;
  double fit_window = 600.0;

  void validate() const;
};

using CategoryModels = std::array<CategoryModel, kNumCategories>;
// Lifespans API 60 s, Text 300 s, Code 600 s, Thinking 30 s; lambda = 1 / lifespan.
CategoryModels default_category_models();

struct EvictionConfig {
  double theta_hi = 0.95;
  double theta_lo = 0.85;
  void validate() const;
};

struct ReplicationConfig {
  uint32_t tau_off = 512;
  uint32_t tau_cards = 2;
  uint32_t tau_hits = 8;
  double revoke_threshold = 0.5;
  double reserve_fraction = 0.1;
  void validate() const;
};

// F(dt + l) - F(dt) for F(t) = 1 - exp(-lambda t).
double reuse_prob(const CategoryModel& cm, double dt);

struct DemotionScore {
  double neg_reuse = 0.0;
  double offset = 0.0;
  double neg_remote = 0.0;
  auto operator<=>(const DemotionScore&) const = default;
};

// (-reuse, +offset, -n_remote). The block with the lexicographically
// greatest score is demoted first: low reuse, deep offset, few remote hits.
DemotionScore demotion_score(const BlockMeta& b, double now, const CategoryModel& cm);
inline bool demotes_before(const DemotionScore& a, const DemotionScore& b) { return a > b; }

// K to INT8, V to INT4; each half rounded up.
uint64_t quantized_size(uint64_t bytes_fp16);

bool replication_gate(const BlockMeta& b, const ReplicationConfig& rc);

struct ReplicaStats {
  uint64_t eliminated_callbacks = 0;
  double window_accesses = 0.0;
};
bool replica_revoke_check(const ReplicaStats& s, double revoke_threshold);

enum class TransferKind : uint8_t { kPromotion, kCallback, kDemotion, kReplicaFanout, kGC };
enum class TransferClass : uint8_t { kForeground, kBackground };
inline constexpr TransferKind kAllTransferKinds[] = {TransferKind::kPromotion, TransferKind::kCallback,
                                                     TransferKind::kDemotion, TransferKind::kReplicaFanout,
                                                     TransferKind::kGC};
std::string_view to_string(TransferKind k);
std::string_view to_string(TransferClass c);
TransferClass classify_transfer(TransferKind kind);

struct TransferDescriptor {
  TransferKind kind = TransferKind::kDemotion;
  TransferClass cls = TransferClass::kBackground;
  uint64_t block = 0;
  uint64_t bytes_fp16 = 0;
  uint64_t bytes_moved = 0;
  bool k8v4 = false;
};

// Compute-tier demotion candidates, one queue per category. Blocks pinned
// by a running request count as accessed at `now`.
class DemotionIndex {
 public:
  struct Entry {
    uint64_t id = 0;
    Category category = Category::kApi;
    double t_last = 0.0;
    uint32_t offset = 0;
    uint32_t n_remote = 0;
    uint64_t bytes = 0;
    bool in_use = false;
  };

  void upsert(const Entry& e);
  bool erase(uint64_t id);
  bool contains(uint64_t id) const { return entries_.count(id) != 0; }
  const Entry* find(uint64_t id) const;
  size_t size() const { return entries_.size(); }
  // Leaving in-use stamps t_last = now.
  void set_in_use(uint64_t id, bool in_use, double now);
  void touch(uint64_t id, double now);
  void bump_remote(uint64_t id);

  // Queue front of one category: oldest t_last, then deeper offset, then
  // fewer remote hits, then lower id.
  std::optional<Entry> front(Category w, double now) const;
  // Candidate rule: best demotion score among category fronts. Ties keep
  // the earlier category.
  std::optional<Entry> select(double now, const CategoryModels& models) const;
  // Plain LRU across all categories.
  std::optional<Entry> select_lru(double now) const;
  // Oldest entry that is not in use, across all categories.
  std::optional<Entry> oldest_idle() const;

 private:
  struct IdleKey {
    double t_last;
    uint32_t offset;
    uint32_t n_remote;
    uint64_t id;
    bool operator<(const IdleKey& o) const;
  };
  struct BusyKey {
    uint32_t offset;
    uint32_t n_remote;
    uint64_t id;
    bool operator<(const BusyKey& o) const;
  };
  void unlink(const Entry& e);
  void link(const Entry& e);

  std::unordered_map<uint64_t, Entry> entries_;
  std::array<std::set<IdleKey>, kNumCategories> idle_;
  std::array<std::set<BusyKey>, kNumCategories> busy_;
};

// Pops blocks while occupancy > theta_lo, but only when occupancy started
// above theta_hi. Selected blocks leave the index.
std::vector<TransferDescriptor> run_demotion(DemotionIndex& index, double occupancy_bytes,
                                             double capacity_bytes, double now,
                                             const CategoryModels& models, const EvictionConfig& cfg,
                                             bool lru = false);

struct HomeChoice {
  uint32_t card = 0;
  uint32_t stack = 0;
  uint32_t prefix_blocks = 0;
};

// Bit c of the result is set when the block is compute-resident on card c.
using ResidentCards = std::function<uint64_t(uint64_t block)>;

// Every card ranked by (longest compute-resident leading prefix desc, card
// occupancy asc, card asc). The stack is the least occupied on that card.
std::vector<HomeChoice> rank_homes(const Request& req, const ResidentCards& resident,
                                   const std::vector<std::vector<double>>& stack_occupancy);
HomeChoice assign_home(const Request& req, const ResidentCards& resident,
                       const std::vector<std::vector<double>>& stack_occupancy);

struct SchedulerConfig {
  uint32_t token_budget = 8192;
  uint32_t chunk_tokens = 512;
  uint32_t max_running = 256;
  void validate() const;
};

struct RunningView {
  uint64_t id = 0;
  uint32_t prefill_remaining = 0;  // 0 means decoding
};

struct StepPlan {
  std::vector<uint64_t> decode;
  std::vector<std::pair<uint64_t, uint32_t>> prefill;  // (id, tokens)
  uint32_t tokens() const;
  bool empty() const { return decode.empty() && prefill.empty(); }
};

// Decode slots first, then prefill chunks in running order.
StepPlan schedule_step(const std::vector<RunningView>& running, const SchedulerConfig& cfg);

struct RetentionConfig {
  std::array<double, kNumCategories> next_turn_prob = {0.6, 0.5, 0.4, 0.05};
  double threshold = 0.5;
  uint32_t budget_blocks = 32;
};

// Number of leading prompt blocks kept in compute after completion.
uint32_t prefix_retention(uint32_t prompt_blocks, Category w, const RetentionConfig& cfg);

// Exponential MLE. Fewer than two samples keeps the prior.
CategoryModel fit_category_cdf(const std::vector<double>& samples, const CategoryModel& prior,
                               double max_lambda = 1e3);

}  // namespace stacksim
