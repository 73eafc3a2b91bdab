// Copyright 2026 The StackSim Authors
// SPDX-License-Identifier: Apache-2.0

#include "stacksim/runtime.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace stacksim {

void CategoryModel::validate() const {
  if (!(lambda > 0)) throw std::invalid_argument("lambda must be > 0");
  if (!(lifespan > 0)) throw std::invalid_argument("lifespan must be > 0");
  if (!(fit_window > 0)) throw std::invalid_argument("fit_window must be > 0");
}

CategoryModels default_category_models() {
  const std::array<double, kNumCategories> lifespans = {60.0, 300.0, 600.0, 30.0};
  CategoryModels out;
  for (Category w : kAllCategories) {
    CategoryModel& m = out[index_of(w)];
    m.category = w;
    m.lifespan = lifespans[index_of(w)];
    m.lambda = 1.0 / m.lifespan;
    m.fit_window = 600.0;
  }
  return out;
}

void EvictionConfig::validate() const {
  if (!(theta_lo > 0 && theta_hi <= 1 && theta_lo < theta_hi))
    throw std::invalid_argument("need 0 < theta_lo < theta_hi <= 1");
}

void ReplicationConfig::validate() const {
  if (revoke_threshold < 0) throw std::invalid_argument("revoke_threshold must be >= 0");
  if (reserve_fraction < 0 || reserve_fraction > 0.5)
    throw std::invalid_argument("reserve_fraction must be in [0, 0.5]");
}

double reuse_prob(const CategoryModel& cm, double dt) {
  if (dt < 0 || std::isnan(dt)) throw std::invalid_argument("reuse_prob needs dt >= 0");
  return std::exp(-cm.lambda * dt) * -std::expm1(-cm.lambda * cm.lifespan);
}

DemotionScore demotion_score(const BlockMeta& b, double now, const CategoryModel& cm) {
  return {-reuse_prob(cm, std::max(0.0, now - b.t_last)), static_cast<double>(b.offset),
          -static_cast<double>(b.n_remote)};
}

uint64_t quantized_size(uint64_t bytes_fp16) {
  const uint64_t k = (bytes_fp16 + 1) / 2;
  const uint64_t v = bytes_fp16 / 2;
  return (k + 1) / 2 + (v + 3) / 4;
}

bool replication_gate(const BlockMeta& b, const ReplicationConfig& rc) {
  return b.offset <= rc.tau_off && b.n_cards > rc.tau_cards && b.n_remote > rc.tau_hits;
}

bool replica_revoke_check(const ReplicaStats& s, double revoke_threshold) {
  if (s.window_accesses <= 0) return true;
  return static_cast<double>(s.eliminated_callbacks) / s.window_accesses < revoke_threshold;
}

std::string_view to_string(TransferKind k) {
  switch (k) {
    case TransferKind::kPromotion: return "promotion";
    case TransferKind::kCallback: return "callback";
    case TransferKind::kDemotion: return "demotion";
    case TransferKind::kReplicaFanout: return "replica_fanout";
    case TransferKind::kGC: return "gc";
  }
  return "?";
}

std::string_view to_string(TransferClass c) {
  return c == TransferClass::kForeground ? "foreground" : "background";
}

TransferClass classify_transfer(TransferKind kind) {
  switch (kind) {
    case TransferKind::kPromotion:
    case TransferKind::kCallback: return TransferClass::kForeground;
    default: return TransferClass::kBackground;
  }
}

bool DemotionIndex::IdleKey::operator<(const IdleKey& o) const {
  if (t_last != o.t_last) return t_last < o.t_last;
  if (offset != o.offset) return offset > o.offset;
  if (n_remote != o.n_remote) return n_remote < o.n_remote;
  return id < o.id;
}

bool DemotionIndex::BusyKey::operator<(const BusyKey& o) const {
  if (offset != o.offset) return offset > o.offset;
  if (n_remote != o.n_remote) return n_remote < o.n_remote;
  return id < o.id;
}

void DemotionIndex::unlink(const Entry& e) {
  const size_t w = index_of(e.category);
  if (e.in_use)
    busy_[w].erase({e.offset, e.n_remote, e.id});
  else
    idle_[w].erase({e.t_last, e.offset, e.n_remote, e.id});
}

void DemotionIndex::link(const Entry& e) {
  const size_t w = index_of(e.category);
  if (e.in_use)
    busy_[w].insert({e.offset, e.n_remote, e.id});
  else
    idle_[w].insert({e.t_last, e.offset, e.n_remote, e.id});
}

void DemotionIndex::upsert(const Entry& e) {
  auto it = entries_.find(e.id);
  if (it != entries_.end()) {
    unlink(it->second);
    it->second = e;
  } else {
    entries_.emplace(e.id, e);
  }
  link(e);
}

bool DemotionIndex::erase(uint64_t id) {
  auto it = entries_.find(id);
  if (it == entries_.end()) return false;
  unlink(it->second);
  entries_.erase(it);
  return true;
}

const DemotionIndex::Entry* DemotionIndex::find(uint64_t id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

void DemotionIndex::set_in_use(uint64_t id, bool in_use, double now) {
  auto it = entries_.find(id);
  if (it == entries_.end()) return;
  Entry& e = it->second;
  if (e.in_use == in_use) return;
  unlink(e);
  e.in_use = in_use;
  if (!in_use) e.t_last = now;
  link(e);
}

void DemotionIndex::touch(uint64_t id, double now) {
  auto it = entries_.find(id);
  if (it == entries_.end()) return;
  unlink(it->second);
  it->second.t_last = now;
  link(it->second);
}

void DemotionIndex::bump_remote(uint64_t id) {
  auto it = entries_.find(id);
  if (it == entries_.end()) return;
  unlink(it->second);
  ++it->second.n_remote;
  link(it->second);
}

std::optional<DemotionIndex::Entry> DemotionIndex::front(Category w, double now) const {
  const auto& idle = idle_[index_of(w)];
  const auto& busy = busy_[index_of(w)];
  const Entry* best = nullptr;
  if (!idle.empty()) best = &entries_.at(idle.begin()->id);
  if (!busy.empty()) {
    const BusyKey& b = *busy.begin();
    const IdleKey as_idle{now, b.offset, b.n_remote, b.id};
    if (!best || as_idle < IdleKey{best->t_last, best->offset, best->n_remote, best->id})
      best = &entries_.at(b.id);
  }
  if (!best) return std::nullopt;
  Entry out = *best;
  if (out.in_use) out.t_last = now;
  return out;
}

std::optional<DemotionIndex::Entry> DemotionIndex::select(double now,
                                                          const CategoryModels& models) const {
  std::optional<Entry> best;
  DemotionScore best_score;
  for (Category w : kAllCategories) {
    auto f = front(w, now);
    if (!f) continue;
    BlockMeta m;
    m.t_last = f->t_last;
    m.offset = f->offset;
    m.n_remote = f->n_remote;
    const DemotionScore s = demotion_score(m, now, models[index_of(w)]);
    if (!best || demotes_before(s, best_score)) {
      best = f;
      best_score = s;
    }
  }
  return best;
}

std::optional<DemotionIndex::Entry> DemotionIndex::select_lru(double now) const {
  std::optional<Entry> best;
  for (Category w : kAllCategories) {
    auto f = front(w, now);
    if (!f) continue;
    if (!best || f->t_last < best->t_last || (f->t_last == best->t_last && f->id < best->id))
      best = f;
  }
  return best;
}

std::optional<DemotionIndex::Entry> DemotionIndex::oldest_idle() const {
  const Entry* best = nullptr;
  for (const auto& idle : idle_) {
    if (idle.empty()) continue;
    const Entry& e = entries_.at(idle.begin()->id);
    if (!best || e.t_last < best->t_last || (e.t_last == best->t_last && e.id < best->id)) best = &e;
  }
  if (!best) return std::nullopt;
  return *best;
}

std::vector<TransferDescriptor> run_demotion(DemotionIndex& index, double occupancy_bytes,
                                             double capacity_bytes, double now,
                                             const CategoryModels& models, const EvictionConfig& cfg,
                                             bool lru) {
  std::vector<TransferDescriptor> out;
  if (!(occupancy_bytes > cfg.theta_hi * capacity_bytes)) return out;
  const double target = cfg.theta_lo * capacity_bytes;
  while (occupancy_bytes > target) {
    auto pick = lru ? index.select_lru(now) : index.select(now, models);
    if (!pick) break;
    index.erase(pick->id);
    occupancy_bytes -= static_cast<double>(pick->bytes);
    TransferDescriptor d;
    d.kind = TransferKind::kDemotion;
    d.cls = classify_transfer(d.kind);
    d.block = pick->id;
    d.bytes_fp16 = pick->bytes;
    d.bytes_moved = quantized_size(pick->bytes);
    d.k8v4 = true;
    out.push_back(d);
  }
  return out;
}

std::vector<HomeChoice> rank_homes(const Request& req, const ResidentCards& resident,
                                   const std::vector<std::vector<double>>& stack_occupancy) {
  const size_t cards = stack_occupancy.size();
  if (cards == 0 || cards > 64) throw std::invalid_argument("rank_homes needs 1..64 cards");
  std::vector<uint32_t> prefix(cards, 0);
  uint64_t alive = cards == 64 ? ~0ULL : ((1ULL << cards) - 1);
  for (size_t i = 0; i < req.block_ids.size() && alive; ++i) {
    const uint64_t m = resident ? resident(req.block_ids[i]) : 0;
    alive &= m;
    for (size_t c = 0; c < cards; ++c)
      if (alive >> c & 1) prefix[c] = static_cast<uint32_t>(i + 1);
  }
  std::vector<double> load(cards);
  for (size_t c = 0; c < cards; ++c)
    load[c] = std::accumulate(stack_occupancy[c].begin(), stack_occupancy[c].end(), 0.0);
  std::vector<HomeChoice> out;
  for (size_t c = 0; c < cards; ++c) {
    const auto& st = stack_occupancy[c];
    if (st.empty()) throw std::invalid_argument("card without stacks");
    const auto s = std::min_element(st.begin(), st.end()) - st.begin();
    out.push_back({static_cast<uint32_t>(c), static_cast<uint32_t>(s), prefix[c]});
  }
  std::stable_sort(out.begin(), out.end(), [&](const HomeChoice& a, const HomeChoice& b) {
    if (a.prefix_blocks != b.prefix_blocks) return a.prefix_blocks > b.prefix_blocks;
    return load[a.card] < load[b.card];
  });
  return out;
}

HomeChoice assign_home(const Request& req, const ResidentCards& resident,
                       const std::vector<std::vector<double>>& stack_occupancy) {
  return rank_homes(req, resident, stack_occupancy).front();
}

void SchedulerConfig::validate() const {
  if (token_budget < 1 || chunk_tokens < 1 || max_running < 1)
    throw std::invalid_argument("scheduler limits must be >= 1");
}

uint32_t StepPlan::tokens() const {
  uint32_t t = static_cast<uint32_t>(decode.size());
  for (const auto& p : prefill) t += p.second;
  return t;
}

StepPlan schedule_step(const std::vector<RunningView>& running, const SchedulerConfig& cfg) {
  StepPlan plan;
  uint32_t budget = cfg.token_budget;
  for (const auto& r : running) {
    if (budget == 0) break;
    if (r.prefill_remaining == 0) {
      plan.decode.push_back(r.id);
      --budget;
    }
  }
  for (const auto& r : running) {
    if (budget == 0) break;
    if (r.prefill_remaining == 0) continue;
    const uint32_t t = std::min({r.prefill_remaining, cfg.chunk_tokens, budget});
    plan.prefill.emplace_back(r.id, t);
    budget -= t;
  }
  return plan;
}

uint32_t prefix_retention(uint32_t prompt_blocks, Category w, const RetentionConfig& cfg) {
  if (!(cfg.next_turn_prob[index_of(w)] > cfg.threshold)) return 0;
  return std::min(prompt_blocks, cfg.budget_blocks);
}

CategoryModel fit_category_cdf(const std::vector<double>& samples, const CategoryModel& prior,
                               double max_lambda) {
  if (samples.size() < 2) return prior;
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / samples.size();
  CategoryModel out = prior;
  out.lambda = mean > 0 ? std::min(1.0 / mean, max_lambda) : max_lambda;
  return out;
}

}  // namespace stacksim
