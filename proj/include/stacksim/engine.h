// Copyright 2026 The StackSim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "stacksim/layout.h"
#include "stacksim/model.h"
#include "stacksim/runtime.h"
#include "stacksim/stack.h"
#include "stacksim/trace.h"

namespace stacksim {

enum class EventKind : uint8_t { kArrival, kStepComplete, kTransferComplete, kRefitCDF };
std::string_view to_string(EventKind k);

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::kArrival;
  uint64_t seq = 0;
  uint64_t payload = 0;
};

// Min-heap on (time, seq): equal times pop in insertion order.
class EventQueue {
 public:
  void push(double time, EventKind kind, uint64_t payload = 0);
  Event pop();
  const Event& top() const { return heap_.front(); }
  bool empty() const { return heap_.empty(); }
  size_t size() const { return heap_.size(); }

 private:
  std::vector<Event> heap_;
  uint64_t next_seq_ = 0;
};

struct TimingParams {
  // Per-stack PIM streaming rate over compute-layer banks.
  double pim_bw = 2048e9;
  double pim_flops = 2048e9;
  // Base-die aggregation rate; 0 means the stack's TSV bandwidth.
  double basedie_agg_bw = 0.0;
  double t_fixed_step = 50e-6;
  double t_mode_switch = 0.5e-6;
  double promotion_fixed_latency = 1.5e-6;
  // Share of stack interface bandwidth that streams weights to the GPU;
  // negative means the mode default.
  double gpu_visible_fraction = -1.0;

  void validate() const;
};

double default_gpu_visible_fraction(Mode mode);

struct EnergyParams {
  double offchip_pj_per_byte = 6.0;     // GPU <-> stack interface
  double gpu_pj_per_flop = 0.8;
  double pim_pj_per_flop = 0.4;
  double pim_read_pj_per_byte = 1.0;   // in-bank reads for PIM attention
  double tsv_pj_per_byte = 1.0;
  double nvlink_pj_per_byte = 10.0;
  double pcie_pj_per_byte = 20.0;
  double basedie_pj_per_byte = 1.0;    // bank <-> base-die traffic
  double quant_pj_per_byte = 0.5;

  void validate() const;
};

struct EnergyBreakdown {
  double fc_offchip = 0.0;
  double attn_offchip = 0.0;
  double fc_onchip = 0.0;
  double attn_onchip = 0.0;
  double communication = 0.0;  // joules, like every field

  double total() const { return fc_offchip + attn_offchip + fc_onchip + attn_onchip + communication; }
  EnergyBreakdown& operator+=(const EnergyBreakdown& o);
};

struct AblationFlags {
  bool layout = true;
  bool topology_homes = true;
  bool quantization = true;
  bool category_eviction = true;
  bool replication = true;
};

struct PolicyConfig {
  EvictionConfig eviction;
  ReplicationConfig replication;
  SchedulerConfig scheduler;
  RetentionConfig retention;
  CategoryModels categories = default_category_models();
  double gamma = 0.0;  // 0 means 1 / B
  double hysteresis = 2.0;
  // Forced layout for AttAcc / Uniform.
  LayoutMode baseline_layout = LayoutMode::kTmTm;
  // Layout used by TokenStack when layout selection is ablated.
  LayoutMode ablation_layout = LayoutMode::kDhDh;
  AblationFlags ablation;
  double admission_fraction = 0.95;
  double refit_period = 60.0;
  double evicted_gc_horizon = 600.0;
  double max_lambda = 1e3;

  void validate() const;
};

double transfer_time(double bytes, LinkPath path, bool quantized, const NodeTopology& topo);

// Per-request decode view used by the attention timing model.
struct AttentionLoad {
  double hot_bytes = 0.0;    // compute-layer resident
  double cold_bytes = 0.0;   // capacity-layer resident, fp16 size
  double cold_stored = 0.0;  // the same data at its stored size
  double context = 0.0;      // tokens
  LayoutMode layout = LayoutMode::kTmDh;
};

// Time for one stack to serve `loads` in one decode step, excluding the
// fixed step overhead.
double stack_attention_time(const std::vector<AttentionLoad>& loads, const ModelConfig& model,
                            const NodeTopology& topo, const TimingParams& timing, double gamma);
// Single-request step latency including the fixed overhead and, for
// Uniform, the mode-switch stall.
double decode_attention_time(const AttentionLoad& load, const ModelConfig& model,
                             const NodeTopology& topo, const TimingParams& timing, double gamma);

// A TSV, NVLink or PCIe channel. Foreground transfers queue among
// themselves at full bandwidth; background transfers run only in gaps left
// by foreground work and never delay it.
class Link {
 public:
  explicit Link(double bandwidth = 1.0) : bw_(bandwidth) {}
  // Occupies the link for `duration` seconds; returns the completion time.
  double submit(double now, double duration, TransferClass cls);
  // Completion of a background transfer that started at `start` with
  // `duration` of service, given the foreground work known so far.
  double background_completion(double start, double duration) const;
  double bandwidth() const { return bw_; }

 private:
  double bw_;
  double fg_until_ = 0.0;
  double bg_until_ = 0.0;
  std::deque<std::pair<double, double>> fg_;  // busy intervals, sorted
};

struct RequestMetrics {
  uint64_t id = 0;
  Category category = Category::kApi;
  double arrival = 0.0;
  double admitted = 0.0;
  double ttft = 0.0;
  double e2e = 0.0;
  double mean_tbt = 0.0;
  uint32_t generated = 0;
  uint32_t prompt_blocks = 0;
  uint32_t hit_blocks = 0;
};

struct TransferTotals {
  std::array<double, 5> bytes_by_kind{};  // indexed by TransferKind
  double foreground_bytes = 0.0;
  double background_bytes = 0.0;
  double tsv_bytes = 0.0;
  double ucie_bytes = 0.0;
  double nvlink_bytes = 0.0;
  double pcie_bytes = 0.0;
};

// Byte ledger for the capacity tier; fp16 and stored (possibly K8V4) sizes.
struct DemotionLedger {
  double demoted_fp16 = 0.0, promoted_fp16 = 0.0, resident_fp16 = 0.0, gc_fp16 = 0.0;
  double demoted_stored = 0.0, promoted_stored = 0.0, resident_stored = 0.0, gc_stored = 0.0;
  double residual_fp16() const { return demoted_fp16 - promoted_fp16 - resident_fp16 - gc_fp16; }
  double residual_stored() const {
    return demoted_stored - promoted_stored - resident_stored - gc_stored;
  }
};

struct PolicyCounters {
  uint64_t demotions = 0;
  uint64_t promotions = 0;
  uint64_t callbacks = 0;
  uint64_t replications = 0;
  uint64_t revocations = 0;
  uint64_t discards = 0;
  uint64_t gc = 0;
  uint64_t host_spills = 0;
  uint64_t refits = 0;
  std::array<uint64_t, 3> layout_choices{};  // indexed by LayoutMode
};

struct RunMetrics {
  bool feasible = true;
  std::string verdict = "ok";
  size_t requests = 0;
  double makespan = 0.0;
  double generated_tokens = 0.0;
  double token_throughput = 0.0;    // tokens / s
  double request_throughput = 0.0;  // requests / s
  std::vector<RequestMetrics> per_request;  // in trace order
  std::vector<double> ttft, tbt, e2e, queue_delay;
  // Prompt-block accesses by where they were found.
  double compute_hits = 0.0, capacity_hits = 0.0, remote_hits = 0.0, misses = 0.0;
  // Decode KV bytes read from compute layers vs. everything else.
  double hot_bytes_read = 0.0, cold_bytes_read = 0.0;
  double compute_hit_rate = 0.0;       // by accesses
  double compute_byte_hit_rate = 0.0;  // by decode bytes
  EnergyBreakdown energy;
  double energy_per_token = 0.0;
  TransferTotals transfers;
  DemotionLedger ledger;
  PolicyCounters policy;
  uint64_t steps = 0;
  uint64_t events = 0;
  // Peak compute / capacity tier bytes over the run and the largest
  // violation of a tier budget observed after any event (0 when none).
  double peak_compute_fraction = 0.0;
  double capacity_violation_bytes = 0.0;
  // Every foreground transfer completion, in issue order.
  std::vector<double> foreground_completions;
  std::vector<std::string> policy_log;  // JSONL lines when enabled
};

struct RunOptions {
  bool policy_log = false;
};

RunMetrics run(const ModelConfig& model, const Trace& trace, const NodeTopology& topo,
               const PolicyConfig& policy, const TimingParams& timing,
               const EnergyParams& energy, uint64_t seed = 1, const RunOptions& opts = {});

}  // namespace stacksim
