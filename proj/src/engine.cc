// Copyright 2026 The StackSim Authors
// SPDX-License-Identifier: Apache-2.0

#include "stacksim/engine.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace stacksim {

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::kArrival: return "arrival";
    case EventKind::kStepComplete: return "step_complete";
    case EventKind::kTransferComplete: return "transfer_complete";
    case EventKind::kRefitCDF: return "refit_cdf";
  }
  return "?";
}

namespace {

bool later(const Event& a, const Event& b) {
  if (a.time != b.time) return a.time > b.time;
  return a.seq > b.seq;
}

}  // namespace

void EventQueue::push(double time, EventKind kind, uint64_t payload) {
  heap_.push_back(Event{time, kind, next_seq_++, payload});
  std::push_heap(heap_.begin(), heap_.end(), later);
}

Event EventQueue::pop() {
  if (heap_.empty()) throw std::logic_error("pop from empty event queue");
  std::pop_heap(heap_.begin(), heap_.end(), later);
  Event e = heap_.back();
  heap_.pop_back();
  return e;
}

void TimingParams::validate() const {
  if (!(pim_bw > 0 && pim_flops > 0)) throw std::invalid_argument("PIM rates must be positive");
  if (basedie_agg_bw < 0) throw std::invalid_argument("basedie_agg_bw must be >= 0");
  if (t_fixed_step < 0 || t_mode_switch < 0 || promotion_fixed_latency < 0)
    throw std::invalid_argument("latencies must be >= 0");
  if (gpu_visible_fraction > 1 || gpu_visible_fraction == 0)
    throw std::invalid_argument("gpu_visible_fraction must be in (0, 1] or negative");
}

double default_gpu_visible_fraction(Mode mode) { return mode == Mode::kAttAcc ? 0.5 : 1.0; }

void EnergyParams::validate() const {
  for (double v : {offchip_pj_per_byte, gpu_pj_per_flop, pim_pj_per_flop, pim_read_pj_per_byte,
                   tsv_pj_per_byte, nvlink_pj_per_byte, pcie_pj_per_byte, basedie_pj_per_byte,
                   quant_pj_per_byte})
    if (v < 0) throw std::invalid_argument("energy coefficients must be >= 0");
}

EnergyBreakdown& EnergyBreakdown::operator+=(const EnergyBreakdown& o) {
  fc_offchip += o.fc_offchip;
  attn_offchip += o.attn_offchip;
  fc_onchip += o.fc_onchip;
  attn_onchip += o.attn_onchip;
  communication += o.communication;
  return *this;
}

void PolicyConfig::validate() const {
  eviction.validate();
  replication.validate();
  scheduler.validate();
  for (const auto& c : categories) c.validate();
  if (gamma < 0) throw std::invalid_argument("gamma must be >= 0");
  if (hysteresis < 1) throw std::invalid_argument("hysteresis must be >= 1");
  if (!(admission_fraction > 0 && admission_fraction <= 1))
    throw std::invalid_argument("admission_fraction must be in (0, 1]");
  if (!(refit_period > 0)) throw std::invalid_argument("refit_period must be > 0");
  if (evicted_gc_horizon < 0) throw std::invalid_argument("evicted_gc_horizon must be >= 0");
}

double transfer_time(double bytes, LinkPath path, bool quantized, const NodeTopology& topo) {
  if (bytes < 0) throw std::invalid_argument("transfer_time needs bytes >= 0");
  double bw = link_bandwidth(path, topo);
  if (quantized && path == LinkPath::kTsv) bw = std::min(bw, topo.stack.quant_engine_bw);
  return bytes / bw;
}

namespace {

// Ids of request-private blocks; trace block ids are hashes and never collide in practice.
constexpr uint64_t kOwnedTag = uint64_t{1} << 63;

double effective_gamma(double gamma, const NodeTopology& topo) {
  return gamma > 0 ? gamma : 1.0 / std::max<uint32_t>(1, topo.stack.B);
}

double agg_bw(const NodeTopology& topo, const TimingParams& t) {
  return t.basedie_agg_bw > 0 ? t.basedie_agg_bw : topo.stack.tsv_bw;
}

// Bank and base-die traffic for one request-step, in bytes, and its time.
struct CommCost {
  double bytes = 0.0;
  double seconds = 0.0;
};

CommCost comm_cost_for(const AttentionLoad& l, const ModelConfig& m, const NodeTopology& topo,
                       const TimingParams& t, double gamma) {
  if (l.context <= 0 || topo.mode == Mode::kFullGPU) return {};
  LayoutParams p;
  p.L = l.context;
  p.d = m.head_dim();
  p.B = topo.stack.B;
  p.gamma = gamma;
  const CommVolumes v = comm_volumes(l.layout, p);
  const double scale = static_cast<double>(m.dtype_bytes) * m.heads * m.layers;
  const double bw = agg_bw(topo, t);
  // Per-bank moves run at bw * gamma, base-die reduction at bw.
  return {(v.t_bank * p.B + v.t_agg) * scale, (v.t_bank + gamma * v.t_agg) * scale / (gamma * bw)};
}

}  // namespace

double stack_attention_time(const std::vector<AttentionLoad>& loads, const ModelConfig& model,
                            const NodeTopology& topo, const TimingParams& timing, double gamma) {
  gamma = effective_gamma(gamma, topo);
  if (topo.mode == Mode::kFullGPU) {
    double bytes = 0.0;
    for (const auto& l : loads) bytes += l.hot_bytes + l.cold_bytes;
    const double flops = 2.0 * bytes / model.dtype_bytes;
    return std::max(bytes / topo.stack.ucie_bw, flops / topo.gpu_flops);
  }
  const double cold_bw = std::min(topo.stack.tsv_bw, topo.stack.quant_engine_bw);
  double t = 0.0;
  for (const auto& l : loads) {
    const double flops = 2.0 * l.hot_bytes / model.dtype_bytes;
    t += std::max(l.hot_bytes / timing.pim_bw, flops / timing.pim_flops);
    t += l.cold_bytes / cold_bw;
    t += comm_cost_for(l, model, topo, timing, gamma).seconds;
  }
  return t;
}

double decode_attention_time(const AttentionLoad& load, const ModelConfig& model,
                             const NodeTopology& topo, const TimingParams& timing, double gamma) {
  double t = stack_attention_time({load}, model, topo, timing, gamma) + timing.t_fixed_step;
  if (topo.mode == Mode::kUniform && load.hot_bytes + load.cold_bytes > 0) t += timing.t_mode_switch;
  return t;
}

double Link::background_completion(double start, double duration) const {
  double t = start;
  double remaining = duration;
  for (const auto& [s, e] : fg_) {
    if (e <= t) continue;
    if (s > t) {
      const double gap = s - t;
      if (gap >= remaining) return t + remaining;
      remaining -= gap;
    }
    t = e;
  }
  return t + remaining;
}

double Link::submit(double now, double duration, TransferClass cls) {
  if (duration < 0) throw std::invalid_argument("negative transfer duration");
  while (!fg_.empty() && fg_.front().second <= now) fg_.pop_front();
  if (cls == TransferClass::kForeground) {
    const double start = std::max(now, fg_until_);
    const double end = start + duration;
    fg_until_ = end;
    if (duration > 0) {
      if (!fg_.empty() && fg_.back().second >= start)
        fg_.back().second = end;
      else
        fg_.emplace_back(start, end);
      // Background work in flight pauses for the foreground burst.
      if (bg_until_ > start) bg_until_ += duration;
    }
    return end;
  }
  const double start = std::max(now, bg_until_);
  bg_until_ = background_completion(start, duration);
  return bg_until_;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Replica {
  uint32_t card = 0;
  uint32_t stack = 0;
  uint32_t refs = 0;
  double created = 0.0;
  uint64_t eliminated = 0;
};

struct Block {
  uint64_t id = 0;
  Category category = Category::kApi;
  uint32_t offset = 0;
  // kEvicted keeps the record alive only while replicas remain.
  Tier tier = Tier::kCompute;
  uint32_t card = 0;
  uint32_t stack = 0;
  uint64_t stored = 0;  // size while in the capacity tier
  uint32_t refs = 0;
  double t_last = 0.0;
  double t_access = -1.0;
  double ready_at = 0.0;
  uint32_t n_remote = 0;
  uint64_t cards_mask = 0;
  double window_accesses = 0.0;
  std::vector<Replica> replicas;
  std::vector<uint32_t> users;  // running requests pinning the primary
  bool owned = false;           // private to one request; released at completion

  Replica* replica_on(uint32_t c) {
    for (auto& r : replicas)
      if (r.card == c) return &r;
    return nullptr;
  }
};

struct Card {
  double occ = 0.0;       // compute-tier bytes resident
  double pinned = 0.0;    // part of occ that cannot be evicted
  double reserved = 0.0;  // promised to admitted requests
  double cap_occ = 0.0;   // capacity-tier stored bytes
  double replica_bytes = 0.0;
  uint32_t active = 0;
  std::vector<double> stack_load;
  DemotionIndex index;
  std::set<std::pair<double, uint64_t>> cap_idle;  // (t_last, id)
  std::set<uint64_t> cold_pinned;
  std::vector<Link> tsv;
  Link nvlink;
  Link pcie;
};

enum class Phase : uint8_t { kQueued, kRunning, kDone };

struct Live {
  const Request* req = nullptr;
  Phase phase = Phase::kQueued;
  uint32_t card = 0;
  uint32_t stack = 0;
  LayoutMode layout = LayoutMode::kTmDh;
  uint32_t prompt_blocks = 0;
  uint32_t run_blocks = 0;  // leading resident prefix at admission
  uint32_t prefill_start = 0;
  uint32_t prefill_total = 0;
  uint32_t prefill_done = 0;
  uint32_t next_register = 0;  // next prompt block index to register
  uint32_t generated = 0;
  uint32_t ctx = 0;
  uint32_t priv_blocks = 0;
  double ready_at = 0.0;
  double admitted = 0.0;
  double first_token = 0.0;
  double last_token = 0.0;
  double tbt_sum = 0.0;
  double reserved = 0.0;
  double priv = 0.0;
  double spill = 0.0;
  double load = 0.0;  // stack_load contribution
  std::vector<double> hot;   // per stack, fp16 bytes
  std::vector<double> cold;  // per stack, stored bytes
  std::vector<uint64_t> pinned_blocks;
  std::vector<uint64_t> owned_blocks;
  std::vector<std::pair<uint64_t, uint32_t>> pinned_replicas;
};

class Simulator {
 public:
  Simulator(const ModelConfig& model, const Trace& trace, const NodeTopology& topo,
            const PolicyConfig& policy, const TimingParams& timing, const EnergyParams& energy,
            const RunOptions& opts)
      : m_(model),
        trace_(trace),
        topo_(topo),
        pol_(policy),
        tm_(timing),
        en_(energy),
        opts_(opts),
        residency_(topo.stack) {}

  RunMetrics run();

 private:
  bool tokenstack() const { return topo_.mode == Mode::kTokenStack; }
  bool has_capacity_tier() const { return tokenstack() && cap_budget_ > 0; }

  double block_stored(uint64_t bytes) const {
    return tokenstack() && pol_.ablation.quantization ? static_cast<double>(quantized_size(bytes))
                                                      : static_cast<double>(bytes);
  }

  void log(const char* what, uint64_t block, uint32_t card) {
    if (!opts_.policy_log) return;
    nlohmann::json j = {{"t", now_}, {"event", what}, {"block", block}, {"card", card}};
    out_.policy_log.push_back(j.dump());
  }

  void transfer_bytes(TransferKind kind, LinkPath path, double bytes) {
    auto& tt = out_.transfers;
    tt.bytes_by_kind[static_cast<size_t>(kind)] += bytes;
    (classify_transfer(kind) == TransferClass::kForeground ? tt.foreground_bytes
                                                            : tt.background_bytes) += bytes;
    switch (path) {
      case LinkPath::kTsv: tt.tsv_bytes += bytes; break;
      case LinkPath::kNvlink: tt.nvlink_bytes += bytes; break;
      case LinkPath::kPcie: tt.pcie_bytes += bytes; break;
      default: tt.ucie_bytes += bytes; break;
    }
  }

  uint64_t resident_mask(uint64_t id) const {
    auto it = blocks_.find(id);
    if (it == blocks_.end()) return 0;
    const Block& b = it->second;
    uint64_t mask = b.tier == Tier::kCompute ? (1ULL << b.card) : 0;
    for (const auto& r : b.replicas) mask |= 1ULL << r.card;
    return mask;
  }

  bool resident_anywhere(uint64_t id) const {
    auto it = blocks_.find(id);
    if (it == blocks_.end()) return false;
    return it->second.tier != Tier::kEvicted || !it->second.replicas.empty();
  }

  // Memory management.
  bool make_room(uint32_t c, double bytes);
  bool ensure_capacity(uint32_t c, double stored);
  bool demote(Block& b, bool foreground_safe);
  void discard(Block& b);
  void gc_capacity(Block& b);
  double promote(Block& b);
  void drop_replica(Block& b, uint32_t card);
  void maybe_drop_block(uint64_t id);
  void high_water(uint32_t c);
  void alloc_private(Live& r, uint32_t offset);
  void release_owned(Block& b);
  void pin(Live& r, Block& b);
  void register_prompt_block(Live& r, uint32_t i);

  // Scheduling.
  double need_on(const Live& r, uint32_t c) const;
  void admit(Live& r, const HomeChoice& h);
  void admit_waiting();
  void try_schedule();
  void finish_step();
  void complete(Live& r);
  void refit();
  void check_invariants();

  const ModelConfig& m_;
  const Trace& trace_;
  const NodeTopology& topo_;
  const PolicyConfig& pol_;
  const TimingParams& tm_;
  const EnergyParams& en_;
  const RunOptions& opts_;

  ResidencyTable residency_;
  RunMetrics out_;
  EventQueue events_;
  double now_ = 0.0;
  double budget_ = 0.0;
  double cap_budget_ = 0.0;
  double admit_limit_ = 0.0;  // fp16 bytes a card may commit to running requests
  uint64_t next_owned_ = 0;
  double block_bytes_ = 0.0;
  double gamma_ = 0.0;
  double visible_ = 1.0;
  CategoryModels models_;
  std::vector<Card> cards_;
  std::vector<Live> live_;
  std::deque<uint32_t> waiting_;
  std::vector<uint32_t> running_;  // admission order
  std::unordered_map<uint64_t, Block> blocks_;
  std::set<uint64_t> replicated_;
  std::map<uint64_t, double> evicted_meta_;  // id -> time evicted
  std::array<std::deque<std::pair<double, double>>, kNumCategories> reuse_samples_;
  bool busy_ = false;
  size_t completed_ = 0;
  StepPlan plan_;
};

bool Simulator::ensure_capacity(uint32_t c, double stored) {
  Card& card = cards_[c];
  if (stored > cap_budget_) return false;
  while (card.cap_occ + stored > cap_budget_) {
    if (card.cap_idle.empty()) return false;
    gc_capacity(blocks_.at(card.cap_idle.begin()->second));
  }
  return true;
}

void Simulator::gc_capacity(Block& b) {
  Card& card = cards_[b.card];
  card.cap_idle.erase({b.t_last, b.id});
  card.cap_occ -= b.stored;
  out_.ledger.gc_fp16 += block_bytes_;
  out_.ledger.gc_stored += b.stored;
  out_.ledger.resident_fp16 -= block_bytes_;
  out_.ledger.resident_stored -= b.stored;
  ++out_.policy.gc;
  transfer_bytes(TransferKind::kGC, LinkPath::kTsv, 0.0);
  log("gc", b.id, b.card);
  b.tier = Tier::kEvicted;
  residency_.erase(b.id);
  for (const auto& r : b.replicas) residency_.place(b.id, r.card, r.stack, LayerKind::kCompute);
  maybe_drop_block(b.id);
}

void Simulator::maybe_drop_block(uint64_t id) {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) return;
  if (it->second.tier == Tier::kEvicted && it->second.replicas.empty()) {
    evicted_meta_[id] = now_;
    residency_.erase(id);
    blocks_.erase(it);
  }
}

void Simulator::discard(Block& b) {
  Card& card = cards_[b.card];
  card.index.erase(b.id);
  card.occ -= block_bytes_;
  ++out_.policy.discards;
  log("discard", b.id, b.card);
  b.tier = Tier::kEvicted;
  residency_.erase(b.id);
  for (const auto& r : b.replicas) residency_.place(b.id, r.card, r.stack, LayerKind::kCompute);
  maybe_drop_block(b.id);
}

// Compute -> capacity with K8V4 (unless ablated). Background on TSV.
bool Simulator::demote(Block& b, bool /*foreground_safe*/) {
  const double stored = block_stored(static_cast<uint64_t>(block_bytes_));
  if (!has_capacity_tier() || !ensure_capacity(b.card, stored)) return false;
  Card& card = cards_[b.card];
  card.index.erase(b.id);
  card.occ -= block_bytes_;
  card.cap_occ += stored;
  b.tier = Tier::kCapacity;
  b.stored = static_cast<uint64_t>(stored);
  if (b.refs > 0) {
    card.pinned -= block_bytes_;
    card.cold_pinned.insert(b.id);
    for (uint32_t u : b.users) {
      live_[u].hot[b.stack] -= block_bytes_;
      live_[u].cold[b.stack] += stored;
    }
  } else {
    card.cap_idle.insert({b.t_last, b.id});
  }
  residency_.place(b.id, b.card, b.stack, LayerKind::kCapacity);
  const bool quant = pol_.ablation.quantization;
  const double dt = transfer_time(block_bytes_, LinkPath::kTsv, quant, topo_);
  b.ready_at = card.tsv[b.stack].submit(std::max(now_, b.ready_at), dt, TransferClass::kBackground);
  transfer_bytes(TransferKind::kDemotion, LinkPath::kTsv, block_bytes_ + stored);
  out_.energy.communication += (block_bytes_ + stored) * en_.tsv_pj_per_byte * 1e-12;
  if (quant) out_.energy.communication += block_bytes_ * en_.quant_pj_per_byte * 1e-12;
  out_.ledger.demoted_fp16 += block_bytes_;
  out_.ledger.demoted_stored += stored;
  out_.ledger.resident_fp16 += block_bytes_;
  out_.ledger.resident_stored += stored;
  ++out_.policy.demotions;
  log("demote", b.id, b.card);
  return true;
}

// Capacity -> compute. Caller has made room. Foreground on TSV.
double Simulator::promote(Block& b) {
  Card& card = cards_[b.card];
  const double stored = static_cast<double>(b.stored);
  card.cap_occ -= stored;
  card.occ += block_bytes_;
  b.tier = Tier::kCompute;
  if (b.refs > 0) {
    card.pinned += block_bytes_;
    card.cold_pinned.erase(b.id);
    for (uint32_t u : b.users) {
      live_[u].cold[b.stack] -= stored;
      live_[u].hot[b.stack] += block_bytes_;
    }
  } else {
    card.cap_idle.erase({b.t_last, b.id});
  }
  card.index.upsert({b.id, b.category, b.t_last, b.offset, b.n_remote,
                     static_cast<uint64_t>(block_bytes_), b.refs > 0});
  residency_.place(b.id, b.card, b.stack, LayerKind::kCompute);
  const bool quant = stored < block_bytes_;
  const double dt = transfer_time(block_bytes_, LinkPath::kTsv, quant, topo_) + tm_.promotion_fixed_latency;
  const double done = card.tsv[b.stack].submit(std::max(now_, b.ready_at), dt, TransferClass::kForeground);
  out_.foreground_completions.push_back(done);
  b.ready_at = done;
  transfer_bytes(TransferKind::kPromotion, LinkPath::kTsv, block_bytes_ + stored);
  out_.energy.communication += (block_bytes_ + stored) * en_.tsv_pj_per_byte * 1e-12;
  if (quant) out_.energy.communication += block_bytes_ * en_.quant_pj_per_byte * 1e-12;
  out_.ledger.promoted_fp16 += block_bytes_;
  out_.ledger.promoted_stored += stored;
  out_.ledger.resident_fp16 -= block_bytes_;
  out_.ledger.resident_stored -= stored;
  ++out_.policy.promotions;
  log("promote", b.id, b.card);
  return done;
}

void Simulator::drop_replica(Block& b, uint32_t c) {
  Card& card = cards_[c];
  card.occ -= block_bytes_;
  card.replica_bytes -= block_bytes_;
  residency_.remove_replica(b.id, c);
  std::erase_if(b.replicas, [c](const Replica& r) { return r.card == c; });
  if (b.replicas.empty()) replicated_.erase(b.id);
  ++out_.policy.revocations;
  log("revoke", b.id, c);
  maybe_drop_block(b.id);
}

bool Simulator::make_room(uint32_t c, double bytes) {
  Card& card = cards_[c];
  if (bytes > budget_) return false;
  while (card.occ + bytes > budget_) {
    std::optional<DemotionIndex::Entry> pick;
    if (tokenstack())
      pick = pol_.ablation.category_eviction ? card.index.select(now_, models_)
                                             : card.index.select_lru(now_);
    else
      pick = card.index.select_lru(now_);
    if (pick) {
      Block& b = blocks_.at(pick->id);
      if (demote(b, false)) continue;
      if (b.refs == 0) {
        discard(b);
        continue;
      }
      // Pinned and nowhere to go: fall back to idle blocks in LRU order.
      if (auto idle = card.index.oldest_idle()) {
        discard(blocks_.at(idle->id));
        continue;
      }
    }
    // Idle replicas are the last resort.
    bool dropped = false;
    for (uint64_t id : replicated_) {
      Block& b = blocks_.at(id);
      Replica* r = b.replica_on(c);
      if (r && r->refs == 0) {
        drop_replica(b, c);
        dropped = true;
        break;
      }
    }
    if (!dropped) return false;
  }
  return true;
}

void Simulator::high_water(uint32_t c) {
  if (!tokenstack()) return;
  Card& card = cards_[c];
  auto picks = run_demotion(card.index, card.occ, budget_, now_, models_, pol_.eviction,
                            !pol_.ablation.category_eviction);
  bool stuck = false;
  for (const auto& d : picks) {
    Block& b = blocks_.at(d.block);
    if (!stuck && demote(b, false)) continue;
    // Nowhere to put it: the block stays a candidate.
    stuck = true;
    card.index.upsert({b.id, b.category, b.t_last, b.offset, b.n_remote,
                       static_cast<uint64_t>(block_bytes_), b.refs > 0});
  }
}

void Simulator::alloc_private(Live& r, uint32_t offset) {
  Card& card = cards_[r.card];
  const double from_reserve = std::min(block_bytes_, r.reserved);
  r.reserved -= from_reserve;
  card.reserved -= from_reserve;
  if (!make_room(r.card, block_bytes_)) {
    r.spill += block_bytes_;
    ++out_.policy.host_spills;
    return;
  }
  card.occ += block_bytes_;
  if (!has_capacity_tier()) {
    card.pinned += block_bytes_;
    r.priv += block_bytes_;
    r.hot[r.stack] += block_bytes_;
    return;
  }
  // With a capacity tier the block is tracked so it can be demoted while in use.
  uint64_t id;
  do id = kOwnedTag | next_owned_++;
  while (blocks_.count(id));
  Block& b = blocks_[id];
  b.id = id;
  b.owned = true;
  b.category = r.req->category;
  b.offset = offset;
  b.card = r.card;
  b.stack = r.stack;
  b.t_last = now_;
  b.ready_at = now_;
  card.index.upsert({id, b.category, now_, b.offset, 0, static_cast<uint64_t>(block_bytes_), false});
  residency_.place(id, r.card, r.stack, LayerKind::kCompute);
  pin(r, b);
  r.owned_blocks.push_back(id);
}

void Simulator::release_owned(Block& b) {
  Card& card = cards_[b.card];
  if (b.tier == Tier::kCompute) {
    card.index.erase(b.id);
    card.occ -= block_bytes_;
  } else if (b.tier == Tier::kCapacity) {
    card.cap_idle.erase({b.t_last, b.id});
    card.cap_occ -= b.stored;
    out_.ledger.gc_fp16 += block_bytes_;
    out_.ledger.gc_stored += b.stored;
    out_.ledger.resident_fp16 -= block_bytes_;
    out_.ledger.resident_stored -= b.stored;
  }
  residency_.erase(b.id);
  blocks_.erase(b.id);
}

void Simulator::pin(Live& r, Block& b) {
  Card& card = cards_[b.card];
  if (b.refs++ == 0) {
    if (b.tier == Tier::kCompute) {
      card.pinned += block_bytes_;
      card.index.set_in_use(b.id, true, now_);
    } else if (b.tier == Tier::kCapacity) {
      card.cap_idle.erase({b.t_last, b.id});
      card.cold_pinned.insert(b.id);
    }
  }
  b.users.push_back(static_cast<uint32_t>(&r - live_.data()));
  r.pinned_blocks.push_back(b.id);
  if (b.tier == Tier::kCompute)
    r.hot[b.stack] += block_bytes_;
  else
    r.cold[b.stack] += b.stored;
}

void Simulator::register_prompt_block(Live& r, uint32_t i) {
  const uint64_t id = r.req->block_ids[i];
  Card& card = cards_[r.card];
  auto it = blocks_.find(id);
  if (it != blocks_.end() && it->second.tier == Tier::kCompute && it->second.card == r.card) {
    const double give = std::min(block_bytes_, r.reserved);
    r.reserved -= give;
    card.reserved -= give;
    pin(r, it->second);
    return;
  }
  if (resident_anywhere(id)) {
    alloc_private(r, i * kBlockTokens);
    return;
  }
  const double give = std::min(block_bytes_, r.reserved);
  r.reserved -= give;
  card.reserved -= give;
  if (!make_room(r.card, block_bytes_)) {
    r.spill += block_bytes_;
    ++out_.policy.host_spills;
    return;
  }
  Block& b = blocks_[id];
  if (b.id != id) {
    b.id = id;
    b.category = r.req->category;
    b.offset = i * kBlockTokens;
  }
  b.tier = Tier::kCompute;
  b.card = r.card;
  b.stack = r.stack;
  b.t_last = now_;
  if (b.t_access < 0) b.t_access = now_;
  b.ready_at = now_;
  evicted_meta_.erase(id);
  card.occ += block_bytes_;
  card.index.upsert({id, b.category, now_, b.offset, b.n_remote,
                     static_cast<uint64_t>(block_bytes_), false});
  residency_.place(id, r.card, r.stack, LayerKind::kCompute);
  pin(r, b);
}

double Simulator::need_on(const Live& r, uint32_t c) const {
  double need = 0.0;
  uint32_t i = 0;
  for (; i < r.prompt_blocks; ++i) {
    auto it = blocks_.find(r.req->block_ids[i]);
    if (it == blocks_.end()) break;
    const Block& b = it->second;
    if (b.tier == Tier::kEvicted && b.replicas.empty()) break;
    const Replica* rep = nullptr;
    for (const auto& x : b.replicas)
      if (x.card == c) rep = &x;
    if (rep)
      need += rep->refs == 0 ? block_bytes_ : 0.0;
    else if (b.tier == Tier::kCompute && b.card == c)
      need += b.refs == 0 ? block_bytes_ : 0.0;
    else
      need += block_bytes_;
  }
  const uint32_t gen_blocks =
      blocks_for_tokens(uint64_t{r.req->prompt_len} + r.req->gen_len) - blocks_for_tokens(r.req->prompt_len);
  return need + (r.prompt_blocks - i + gen_blocks) * block_bytes_;
}

void Simulator::admit(Live& r, const HomeChoice& h) {
  const uint32_t c = h.card;
  const uint32_t idx = static_cast<uint32_t>(&r - live_.data());
  Card& card = cards_[c];
  const double need = need_on(r, c);
  r.card = c;
  r.stack = h.stack;
  r.phase = Phase::kRunning;
  r.admitted = now_;
  r.hot.assign(topo_.stacks_per_gpu, 0.0);
  r.cold.assign(topo_.stacks_per_gpu, 0.0);
  ++card.active;

  if (tokenstack()) {
    LayoutParams lp{static_cast<double>(std::max<uint32_t>(1, r.req->prompt_len)), double(m_.head_dim()),
                    double(topo_.stack.B), gamma_, pol_.hysteresis};
    r.layout = pol_.ablation.layout ? select_layout(lp) : pol_.ablation_layout;
  } else {
    r.layout = pol_.baseline_layout;
  }
  ++out_.policy.layout_choices[static_cast<size_t>(r.layout)];

  double ready = now_;
  uint32_t i = 0;
  for (; i < r.prompt_blocks; ++i) {
    const uint64_t id = r.req->block_ids[i];
    if (!resident_anywhere(id)) break;
    Block& b = blocks_.at(id);
    if (b.t_access >= 0)
      reuse_samples_[index_of(r.req->category)].emplace_back(now_, now_ - b.t_access);
    b.t_access = now_;
    b.window_accesses += 1.0;
    if (Replica* rep = b.replica_on(c)) {
      if (rep->refs++ == 0) card.pinned += block_bytes_;
      ++rep->eliminated;
      r.pinned_replicas.emplace_back(id, c);
      r.hot[rep->stack] += block_bytes_;
      out_.compute_hits += 1;
    } else if (b.tier == Tier::kCompute && b.card == c) {
      pin(r, b);
      ready = std::max(ready, b.ready_at);
      out_.compute_hits += 1;
    } else if (b.tier == Tier::kCapacity && b.card == c) {
      out_.capacity_hits += 1;
      pin(r, b);
      if (make_room(c, block_bytes_) && b.tier == Tier::kCapacity) ready = std::max(ready, promote(b));
    } else {
      out_.remote_hits += 1;
      ++out_.policy.callbacks;
      const double dt = transfer_time(block_bytes_, LinkPath::kNvlink, false, topo_);
      const double done = card.nvlink.submit(std::max(now_, b.ready_at), dt, TransferClass::kForeground);
      out_.foreground_completions.push_back(done);
      ready = std::max(ready, done);
      transfer_bytes(TransferKind::kCallback, LinkPath::kNvlink, block_bytes_);
      out_.energy.attn_offchip += block_bytes_ * en_.nvlink_pj_per_byte * 1e-12;
      log("callback", id, c);
      alloc_private(r, i * kBlockTokens);
      ++b.n_remote;
      b.cards_mask |= 1ULL << c;
      if (b.tier == Tier::kCompute) cards_[b.card].index.bump_remote(id);
      BlockMeta meta;
      meta.offset = b.offset;
      meta.n_remote = b.n_remote;
      meta.n_cards = static_cast<uint32_t>(std::popcount(b.cards_mask));
      if (tokenstack() && pol_.ablation.replication && replication_gate(meta, pol_.replication) &&
          card.replica_bytes + block_bytes_ <= pol_.replication.reserve_fraction * budget_ &&
          make_room(c, block_bytes_) && blocks_.count(id)) {
        Block& bb = blocks_.at(id);
        card.occ += block_bytes_;
        card.replica_bytes += block_bytes_;
        bb.replicas.push_back(Replica{c, r.stack, 0, now_, 0});
        bb.window_accesses = 0.0;
        for (auto& x : bb.replicas) x.eliminated = 0;
        residency_.add_replica(id, c, r.stack);
        replicated_.insert(id);
        card.nvlink.submit(now_, dt, TransferClass::kBackground);
        transfer_bytes(TransferKind::kReplicaFanout, LinkPath::kNvlink, block_bytes_);
        out_.energy.attn_offchip += block_bytes_ * en_.nvlink_pj_per_byte * 1e-12;
        ++out_.policy.replications;
        log("replicate", id, c);
      }
    }
  }
  r.run_blocks = i;
  out_.misses += r.prompt_blocks - i;
  const uint64_t hit_tokens = uint64_t{i} * kBlockTokens;
  r.prefill_total = r.req->prompt_len > hit_tokens ? static_cast<uint32_t>(r.req->prompt_len - hit_tokens) : 1;
  r.prefill_start = r.req->prompt_len - r.prefill_total;
  r.next_register = i;
  const uint32_t gen_blocks = blocks_for_tokens(uint64_t{r.req->prompt_len} + r.req->gen_len) -
                              blocks_for_tokens(r.req->prompt_len);
  r.reserved = (r.prompt_blocks - i + gen_blocks) * block_bytes_;
  card.reserved += r.reserved;
  r.load = need;
  card.stack_load[r.stack] += need;
  r.ready_at = ready;
  if (ready > now_) events_.push(ready, EventKind::kTransferComplete, idx);
  running_.push_back(idx);
  high_water(c);
}

void Simulator::admit_waiting() {
  const bool aware = tokenstack() && pol_.ablation.topology_homes;
  const ResidentCards resident = aware ? ResidentCards([this](uint64_t id) { return resident_mask(id); })
                                       : ResidentCards();
  while (!waiting_.empty() && running_.size() < pol_.scheduler.max_running) {
    Live& r = live_[waiting_.front()];
    std::vector<std::vector<double>> loads;
    for (const auto& c : cards_) loads.push_back(c.stack_load);
    const auto ranks = rank_homes(*r.req, resident, loads);
    std::optional<HomeChoice> pick;
    for (const auto& h : ranks) {
      const Card& c = cards_[h.card];
      const double committed = c.pinned + double(c.cold_pinned.size()) * block_bytes_ + c.reserved;
      if (committed + need_on(r, h.card) <= pol_.admission_fraction * admit_limit_) {
        pick = h;
        break;
      }
    }
    if (!pick)
      for (const auto& h : ranks)
        if (cards_[h.card].active == 0) {
          pick = h;
          break;
        }
    if (!pick) break;
    waiting_.pop_front();
    admit(r, *pick);
  }
}

void Simulator::try_schedule() {
  if (busy_) return;
  admit_waiting();
  std::vector<RunningView> views;
  for (uint32_t idx : running_) {
    const Live& r = live_[idx];
    if (r.ready_at > now_) continue;
    views.push_back({idx, r.prefill_total - r.prefill_done});
  }
  plan_ = schedule_step(views, pol_.scheduler);
  if (plan_.empty()) return;

  for (const auto& [idx, t] : plan_.prefill) {
    Live& r = live_[idx];
    const uint64_t end_tok = uint64_t{r.prefill_start} + r.prefill_done + t;
    while (r.next_register < r.prompt_blocks && uint64_t{r.next_register} * kBlockTokens < end_tok)
      register_prompt_block(r, r.next_register++);
  }
  for (uint64_t idx : plan_.decode) {
    Live& r = live_[idx];
    const uint32_t target = blocks_for_tokens(uint64_t{r.ctx} + 1) - blocks_for_tokens(r.req->prompt_len);
    while (r.priv_blocks < target) {
      alloc_private(r, (blocks_for_tokens(r.req->prompt_len) + r.priv_blocks) * kBlockTokens);
      ++r.priv_blocks;
    }
  }

  const double G = topo_.gpus;
  const FcWork fc = fc_work(m_, plan_.tokens(), stacksim::Phase::kDecode);
  const double t_fc = std::max(fc.flops / (G * topo_.gpu_flops),
                               fc.weight_bytes / (G * topo_.stacks_per_gpu * topo_.stack.ucie_bw * visible_));
  out_.energy.fc_offchip += fc.weight_bytes * en_.offchip_pj_per_byte * 1e-12;
  out_.energy.fc_onchip += fc.flops * en_.gpu_pj_per_flop * 1e-12;

  const size_t S = topo_.stacks_per_gpu;
  const double kvpt = static_cast<double>(kv_bytes_per_token(m_));
  std::vector<std::vector<std::vector<AttentionLoad>>> loads(cards_.size(),
                                                             std::vector<std::vector<AttentionLoad>>(S));
  std::vector<double> spill(cards_.size(), 0.0), gpu(cards_.size(), 0.0);
  const double cold_scale = block_bytes_ / block_stored(static_cast<uint64_t>(block_bytes_));
  for (uint64_t idx : plan_.decode) {
    const Live& r = live_[idx];
    for (size_t s = 0; s < S; ++s) {
      const bool home = s == r.stack;
      if (!home && r.hot[s] <= 0 && r.cold[s] <= 0) continue;
      loads[r.card][s].push_back({r.hot[s], r.cold[s] * cold_scale, r.cold[s], home ? double(r.ctx) + 1.0 : 0.0,
                                  r.layout});
      out_.hot_bytes_read += r.hot[s];
      out_.cold_bytes_read += r.cold[s] * cold_scale;
    }
    spill[r.card] += r.spill;
    out_.cold_bytes_read += r.spill;
  }
  for (const auto& [idx, t] : plan_.prefill) {
    const Live& r = live_[idx];
    const double before = double(r.prefill_start) + r.prefill_done;
    const double flops = 4.0 * t * (before + t) * m_.hidden * m_.layers;
    const double bytes = (before + t) * kvpt;
    gpu[r.card] += flops / topo_.gpu_flops + bytes / (S * topo_.stack.ucie_bw);
    out_.energy.attn_onchip += flops * en_.gpu_pj_per_flop * 1e-12;
    out_.energy.attn_offchip += bytes * en_.offchip_pj_per_byte * 1e-12;
    out_.transfers.ucie_bytes += bytes;
  }

  double t_attn = 0.0;
  for (size_t c = 0; c < cards_.size(); ++c) {
    double t_card = 0.0;
    if (topo_.mode == Mode::kFullGPU) {
      double flops = 0.0;
      for (size_t s = 0; s < S; ++s) {
        double bytes = 0.0;
        for (const auto& l : loads[c][s]) bytes += l.hot_bytes + l.cold_bytes;
        t_card = std::max(t_card, bytes / topo_.stack.ucie_bw);
        flops += 2.0 * bytes / m_.dtype_bytes;
        out_.energy.attn_offchip += bytes * en_.offchip_pj_per_byte * 1e-12;
        out_.transfers.ucie_bytes += bytes;
      }
      t_card = std::max(t_card, flops / topo_.gpu_flops);
      out_.energy.attn_onchip += flops * en_.gpu_pj_per_flop * 1e-12;
    } else {
      for (size_t s = 0; s < S; ++s) {
        t_card = std::max(t_card, stack_attention_time(loads[c][s], m_, topo_, tm_, gamma_));
        for (const auto& l : loads[c][s]) {
          const double flops = 2.0 * l.hot_bytes / m_.dtype_bytes;
          out_.energy.attn_onchip +=
              (l.hot_bytes * en_.pim_read_pj_per_byte + flops * en_.pim_pj_per_flop) * 1e-12;
          out_.energy.communication += l.cold_stored * en_.tsv_pj_per_byte * 1e-12;
          if (l.cold_bytes > l.cold_stored)
            out_.energy.communication += l.cold_bytes * en_.quant_pj_per_byte * 1e-12;
          out_.transfers.tsv_bytes += l.cold_stored;
          out_.energy.communication +=
              comm_cost_for(l, m_, topo_, tm_, gamma_).bytes * en_.basedie_pj_per_byte * 1e-12;
        }
      }
    }
    if (spill[c] > 0) {
      t_card += spill[c] / topo_.pcie_bw;
      out_.energy.attn_offchip += spill[c] * en_.pcie_pj_per_byte * 1e-12;
      out_.transfers.pcie_bytes += spill[c];
    }
    t_attn = std::max(t_attn, t_card + gpu[c]);
  }
  double step = t_fc + t_attn + tm_.t_fixed_step;
  if (topo_.mode == Mode::kUniform && !plan_.decode.empty()) step += tm_.t_mode_switch;
  busy_ = true;
  ++out_.steps;
  events_.push(now_ + step, EventKind::kStepComplete);
}

void Simulator::finish_step() {
  busy_ = false;
  std::vector<uint32_t> done;
  for (const auto& [idx, t] : plan_.prefill) {
    Live& r = live_[idx];
    r.prefill_done += t;
    if (r.prefill_done == r.prefill_total) {
      r.ctx = r.req->prompt_len;
      r.first_token = now_;
      r.last_token = now_;
      r.generated = 1;
      if (r.generated >= r.req->gen_len) done.push_back(static_cast<uint32_t>(idx));
    }
  }
  for (uint64_t idx : plan_.decode) {
    Live& r = live_[idx];
    ++r.generated;
    ++r.ctx;
    const double tbt = now_ - r.last_token;
    out_.tbt.push_back(tbt);
    r.tbt_sum += tbt;
    r.last_token = now_;
    if (r.generated >= r.req->gen_len) done.push_back(static_cast<uint32_t>(idx));
  }
  for (uint32_t idx : done) complete(live_[idx]);
  if (tokenstack()) {
    for (uint32_t c = 0; c < cards_.size(); ++c) {
      Card& card = cards_[c];
      while (!card.cold_pinned.empty() && card.occ + block_bytes_ <= pol_.eviction.theta_lo * budget_)
        promote(blocks_.at(*card.cold_pinned.begin()));
      high_water(c);
    }
  }
  try_schedule();
}

void Simulator::complete(Live& r) {
  const uint32_t idx = static_cast<uint32_t>(&r - live_.data());
  Card& card = cards_[r.card];
  r.phase = Phase::kDone;
  ++completed_;
  for (uint64_t id : r.pinned_blocks) {
    Block& b = blocks_.at(id);
    auto u = std::find(b.users.begin(), b.users.end(), idx);
    if (u != b.users.end()) b.users.erase(u);
    if (--b.refs == 0) {
      b.t_last = now_;
      Card& bc = cards_[b.card];
      if (b.tier == Tier::kCompute) {
        bc.pinned -= block_bytes_;
        bc.index.set_in_use(id, false, now_);
      } else if (b.tier == Tier::kCapacity) {
        bc.cold_pinned.erase(id);
        bc.cap_idle.insert({now_, id});
      }
    }
  }
  for (const auto& [id, c] : r.pinned_replicas) {
    Replica* rep = blocks_.at(id).replica_on(c);
    if (rep && --rep->refs == 0) cards_[c].pinned -= block_bytes_;
  }
  for (uint64_t id : r.owned_blocks) release_owned(blocks_.at(id));
  card.occ -= r.priv;
  card.pinned -= r.priv;
  card.reserved -= r.reserved;
  r.reserved = 0.0;
  --card.active;
  card.stack_load[r.stack] -= r.load;
  running_.erase(std::find(running_.begin(), running_.end(), idx));

  if (tokenstack()) {
    const uint32_t keep = prefix_retention(r.prompt_blocks, r.req->category, pol_.retention);
    for (uint32_t i = keep; i < r.prompt_blocks; ++i) {
      auto it = blocks_.find(r.req->block_ids[i]);
      if (it == blocks_.end()) continue;
      Block& b = it->second;
      if (b.tier == Tier::kCompute && b.refs == 0 && b.card == r.card) demote(b, false);
    }
  }

  RequestMetrics& pm = out_.per_request[idx];
  pm.id = r.req->id;
  pm.category = r.req->category;
  pm.arrival = r.req->arrival;
  pm.admitted = r.admitted;
  pm.ttft = r.first_token - r.req->arrival;
  pm.e2e = now_ - r.req->arrival;
  pm.generated = r.generated;
  pm.mean_tbt = r.generated > 1 ? r.tbt_sum / (r.generated - 1) : 0.0;
  pm.prompt_blocks = r.prompt_blocks;
  pm.hit_blocks = r.run_blocks;
}

void Simulator::refit() {
  ++out_.policy.refits;
  for (Category w : kAllCategories) {
    auto& q = reuse_samples_[index_of(w)];
    CategoryModel& cm = models_[index_of(w)];
    while (!q.empty() && q.front().first < now_ - cm.fit_window) q.pop_front();
    std::vector<double> gaps;
    for (const auto& s : q) gaps.push_back(s.second);
    cm = fit_category_cdf(gaps, cm, pol_.max_lambda);
  }
  if (tokenstack()) {
    for (auto& card : cards_) {
      for (Category w : kAllCategories) {
        const double life = models_[index_of(w)].lifespan;
        while (auto f = card.index.front(w, now_)) {
          if (f->in_use || now_ - f->t_last <= life) break;
          if (!demote(blocks_.at(f->id), false)) break;
        }
      }
    }
  }
  const std::vector<uint64_t> ids(replicated_.begin(), replicated_.end());
  for (uint64_t id : ids) {
    if (!blocks_.count(id)) continue;
    std::vector<uint32_t> revoke;
    {
      Block& b = blocks_.at(id);
      const double copies = double(b.replicas.size()) + (b.tier == Tier::kEvicted ? 0.0 : 1.0);
      for (const auto& rep : b.replicas) {
        if (rep.refs != 0 || now_ - rep.created < pol_.refit_period) continue;
        const ReplicaStats st{rep.eliminated, b.window_accesses / copies};
        if (replica_revoke_check(st, pol_.replication.revoke_threshold)) revoke.push_back(rep.card);
      }
    }
    for (uint32_t c : revoke) {
      if (!blocks_.count(id)) break;
      drop_replica(blocks_.at(id), c);
    }
    if (blocks_.count(id)) {
      Block& b = blocks_.at(id);
      b.window_accesses = 0.0;
      for (auto& rep : b.replicas) rep.eliminated = 0;
    }
  }
  for (auto it = evicted_meta_.begin(); it != evicted_meta_.end();)
    it = it->second < now_ - pol_.evicted_gc_horizon ? evicted_meta_.erase(it) : std::next(it);
  if (completed_ < live_.size()) events_.push(now_ + pol_.refit_period, EventKind::kRefitCDF);
}

void Simulator::check_invariants() {
  for (const auto& c : cards_) {
    const double eps = 1e-6 * std::max(1.0, budget_);
    out_.capacity_violation_bytes = std::max(out_.capacity_violation_bytes, c.occ - budget_ - eps);
    out_.capacity_violation_bytes =
        std::max(out_.capacity_violation_bytes, c.cap_occ - cap_budget_ - eps);
    if (budget_ > 0) out_.peak_compute_fraction = std::max(out_.peak_compute_fraction, c.occ / budget_);
  }
}

RunMetrics Simulator::run() {
  m_.validate();
  topo_.validate();
  pol_.validate();
  tm_.validate();
  en_.validate();
  out_.requests = trace_.requests.size();
  const KvBudget kb = kv_budget(topo_, m_);
  if (kb.oom) {
    out_.feasible = false;
    out_.verdict = "oom: weights need " + std::to_string(kb.weights_per_card / 1e9) +
                   " GB per card, more than the card holds";
    return out_;
  }
  budget_ = kb.compute_kv;
  cap_budget_ = tokenstack() ? kb.capacity_kv : 0.0;
  block_bytes_ = double(kBlockTokens) * kv_bytes_per_token(m_);
  if (budget_ < block_bytes_) {
    out_.feasible = false;
    out_.verdict = "oom: no compute-domain space left for KV";
    return out_;
  }
  admit_limit_ = budget_;
  if (has_capacity_tier())
    admit_limit_ += cap_budget_ * block_bytes_ / block_stored(static_cast<uint64_t>(block_bytes_));
  gamma_ = effective_gamma(pol_.gamma, topo_);
  visible_ = tm_.gpu_visible_fraction > 0 ? tm_.gpu_visible_fraction : default_gpu_visible_fraction(topo_.mode);
  models_ = pol_.categories;

  cards_.resize(topo_.gpus);
  for (auto& c : cards_) {
    c.stack_load.assign(topo_.stacks_per_gpu, 0.0);
    c.tsv.assign(topo_.stacks_per_gpu, Link(topo_.stack.tsv_bw));
    c.nvlink = Link(topo_.nvlink_bw);
    c.pcie = Link(topo_.pcie_bw);
  }
  const size_t n = trace_.requests.size();
  live_.resize(n);
  out_.per_request.resize(n);
  for (size_t i = 0; i < n; ++i) {
    live_[i].req = &trace_.requests[i];
    live_[i].prompt_blocks = static_cast<uint32_t>(trace_.requests[i].block_ids.size());
    events_.push(trace_.requests[i].arrival, EventKind::kArrival, i);
  }
  if (n > 0) events_.push(trace_.requests.front().arrival + pol_.refit_period, EventKind::kRefitCDF);

  while (!events_.empty()) {
    const Event e = events_.pop();
    now_ = e.time;
    ++out_.events;
    switch (e.kind) {
      case EventKind::kArrival:
        waiting_.push_back(static_cast<uint32_t>(e.payload));
        try_schedule();
        break;
      case EventKind::kStepComplete: finish_step(); break;
      case EventKind::kTransferComplete: try_schedule(); break;
      case EventKind::kRefitCDF: refit(); break;
    }
    check_invariants();
  }
  if (completed_ != n) throw std::logic_error("simulation stalled with unfinished requests");

  double last = 0.0;
  for (const auto& pm : out_.per_request) {
    last = std::max(last, pm.arrival + pm.e2e);
    out_.generated_tokens += pm.generated;
    out_.ttft.push_back(pm.ttft);
    out_.e2e.push_back(pm.e2e);
    out_.queue_delay.push_back(pm.admitted - pm.arrival);
  }
  if (n > 0) {
    out_.makespan = last - trace_.requests.front().arrival;
    if (out_.makespan > 0) {
      out_.token_throughput = out_.generated_tokens / out_.makespan;
      out_.request_throughput = double(n) / out_.makespan;
    }
  }
  const double accesses = out_.compute_hits + out_.capacity_hits + out_.remote_hits + out_.misses;
  out_.compute_hit_rate = accesses > 0 ? out_.compute_hits / accesses : 0.0;
  const double read = out_.hot_bytes_read + out_.cold_bytes_read;
  out_.compute_byte_hit_rate = read > 0 ? out_.hot_bytes_read / read : 0.0;
  out_.energy_per_token = out_.generated_tokens > 0 ? out_.energy.total() / out_.generated_tokens : 0.0;
  return out_;
}

}  // namespace

RunMetrics run(const ModelConfig& model, const Trace& trace, const NodeTopology& topo,
               const PolicyConfig& policy, const TimingParams& timing, const EnergyParams& energy,
               uint64_t /*seed*/, const RunOptions& opts) {
  Simulator sim(model, trace, topo, policy, timing, energy, opts);
  return sim.run();
}

}  // namespace stacksim
