// Copyright 2026 The StackSim Authors
// SPDX-License-Identifier: Apache-2.0

#include "stacksim/harness.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace stacksim {

using nlohmann::json;

double percentile(std::vector<double> series, double p) {
  if (series.empty()) throw std::invalid_argument("percentile of an empty series");
  if (!(p >= 0 && p <= 100)) throw std::invalid_argument("percentile p must be in [0, 100]");
  std::sort(series.begin(), series.end());
  const double n = static_cast<double>(series.size());
  size_t rank = static_cast<size_t>(std::ceil(p / 100.0 * n));
  rank = std::clamp<size_t>(rank, 1, series.size());
  return series[rank - 1];
}

double slo_capacity(const std::vector<double>& qps, const std::vector<double>& p50,
                    const std::vector<bool>& feasible, double factor) {
  if (qps.size() != p50.size() || qps.size() != feasible.size())
    throw std::invalid_argument("slo_capacity needs aligned series");
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < qps.size(); ++i)
    if (feasible[i]) best = std::min(best, p50[i]);
  if (!std::isfinite(best)) return 0.0;
  double cap = 0.0;
  for (size_t i = 0; i < qps.size(); ++i)
    if (feasible[i] && p50[i] <= factor * best) cap = std::max(cap, qps[i]);
  return cap;
}

double geomean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) {
    if (!(x > 0)) throw std::invalid_argument("geomean needs positive values");
    s += std::log(x);
  }
  return std::exp(s / xs.size());
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("pearson needs two aligned series");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

void ExperimentConfig::validate() const {
  model.validate();
  if (qps.empty()) throw std::invalid_argument("qps list must not be empty");
  for (double q : qps)
    if (!(q > 0)) throw std::invalid_argument("qps values must be > 0");
  if (modes.empty()) throw std::invalid_argument("mode list must not be empty");
  std::set<double> uq(qps.begin(), qps.end());
  if (uq.size() != qps.size()) throw std::invalid_argument("qps values must be distinct");
  policy.validate();
  timing.validate();
  energy.validate();
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw std::invalid_argument("unknown key '" + k + "' in " + where);
  }
}

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <class T>
void take_per_category(const json& j, const char* key, std::array<T, kNumCategories>& out) {
  if (!j.contains(key)) return;
  const json& o = j.at(key);
  check_keys(o, {"api", "text", "code", "thinking"}, key);
  for (Category w : kAllCategories) take(o, std::string(to_string(w)).c_str(), out[index_of(w)]);
}

ModelConfig parse_model(const json& j) {
  if (j.is_string()) return model_preset(j.get<std::string>());
  check_keys(j, {"preset", "name", "layers", "hidden", "heads", "kv_heads", "params", "dtype_bytes"}, "model");
  ModelConfig m = j.contains("preset") ? model_preset(j.at("preset").get<std::string>()) : ModelConfig{};
  take(j, "name", m.name);
  take(j, "layers", m.layers);
  take(j, "hidden", m.hidden);
  take(j, "heads", m.heads);
  if (!j.contains("kv_heads") && j.contains("heads")) m.kv_heads = m.heads;
  take(j, "kv_heads", m.kv_heads);
  take(j, "params", m.params);
  take(j, "dtype_bytes", m.dtype_bytes);
  return m;
}

void parse_policy(const json& j, PolicyConfig& p) {
  check_keys(j,
             {"theta_hi", "theta_lo", "tau_off", "tau_cards", "tau_hits", "revoke_threshold",
              "reserve_fraction", "token_budget", "chunk_tokens", "max_running", "retention_threshold",
              "retention_budget", "next_turn_prob", "lifespan", "gamma", "hysteresis", "baseline_layout",
              "ablation_layout", "ablation", "admission_fraction", "refit_period", "evicted_gc_horizon",
              "max_lambda"},
             "policy");
  take(j, "theta_hi", p.eviction.theta_hi);
  take(j, "theta_lo", p.eviction.theta_lo);
  take(j, "tau_off", p.replication.tau_off);
  take(j, "tau_cards", p.replication.tau_cards);
  take(j, "tau_hits", p.replication.tau_hits);
  take(j, "revoke_threshold", p.replication.revoke_threshold);
  take(j, "reserve_fraction", p.replication.reserve_fraction);
  take(j, "token_budget", p.scheduler.token_budget);
  take(j, "chunk_tokens", p.scheduler.chunk_tokens);
  take(j, "max_running", p.scheduler.max_running);
  take(j, "retention_threshold", p.retention.threshold);
  take(j, "retention_budget", p.retention.budget_blocks);
  take_per_category(j, "next_turn_prob", p.retention.next_turn_prob);
  if (j.contains("lifespan")) {
    std::array<double, kNumCategories> life{};
    for (Category w : kAllCategories) life[index_of(w)] = p.categories[index_of(w)].lifespan;
    take_per_category(j, "lifespan", life);
    for (Category w : kAllCategories) {
      p.categories[index_of(w)].lifespan = life[index_of(w)];
      p.categories[index_of(w)].lambda = 1.0 / life[index_of(w)];
    }
  }
  take(j, "gamma", p.gamma);
  take(j, "hysteresis", p.hysteresis);
  if (j.contains("baseline_layout")) p.baseline_layout = parse_layout_mode(j.at("baseline_layout").get<std::string>());
  if (j.contains("ablation_layout")) p.ablation_layout = parse_layout_mode(j.at("ablation_layout").get<std::string>());
  if (j.contains("ablation")) {
    const json& a = j.at("ablation");
    check_keys(a, {"layout", "topology_homes", "quantization", "category_eviction", "replication"}, "ablation");
    take(a, "layout", p.ablation.layout);
    take(a, "topology_homes", p.ablation.topology_homes);
    take(a, "quantization", p.ablation.quantization);
    take(a, "category_eviction", p.ablation.category_eviction);
    take(a, "replication", p.ablation.replication);
  }
  take(j, "admission_fraction", p.admission_fraction);
  take(j, "refit_period", p.refit_period);
  take(j, "evicted_gc_horizon", p.evicted_gc_horizon);
  take(j, "max_lambda", p.max_lambda);
}

void parse_timing(const json& j, TimingParams& t) {
  check_keys(j,
             {"pim_bw", "pim_flops", "basedie_agg_bw", "t_fixed_step", "t_mode_switch",
              "promotion_fixed_latency", "gpu_visible_fraction"},
             "timing");
  take(j, "pim_bw", t.pim_bw);
  take(j, "pim_flops", t.pim_flops);
  take(j, "basedie_agg_bw", t.basedie_agg_bw);
  take(j, "t_fixed_step", t.t_fixed_step);
  take(j, "t_mode_switch", t.t_mode_switch);
  take(j, "promotion_fixed_latency", t.promotion_fixed_latency);
  take(j, "gpu_visible_fraction", t.gpu_visible_fraction);
}

void parse_energy(const json& j, EnergyParams& e) {
  check_keys(j,
             {"offchip_pj_per_byte", "gpu_pj_per_flop", "pim_pj_per_flop", "pim_read_pj_per_byte",
              "tsv_pj_per_byte", "nvlink_pj_per_byte", "pcie_pj_per_byte", "basedie_pj_per_byte",
              "quant_pj_per_byte"},
             "energy");
  take(j, "offchip_pj_per_byte", e.offchip_pj_per_byte);
  take(j, "gpu_pj_per_flop", e.gpu_pj_per_flop);
  take(j, "pim_pj_per_flop", e.pim_pj_per_flop);
  take(j, "pim_read_pj_per_byte", e.pim_read_pj_per_byte);
  take(j, "tsv_pj_per_byte", e.tsv_pj_per_byte);
  take(j, "nvlink_pj_per_byte", e.nvlink_pj_per_byte);
  take(j, "pcie_pj_per_byte", e.pcie_pj_per_byte);
  take(j, "basedie_pj_per_byte", e.basedie_pj_per_byte);
  take(j, "quant_pj_per_byte", e.quant_pj_per_byte);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j,
             {"model", "trace", "modes", "qps", "policy", "timing", "energy", "topology", "output_dir",
              "seed", "threads"},
             "config");
  ExperimentConfig cfg;
  try {
    if (j.contains("model")) cfg.model = parse_model(j.at("model"));
    if (j.contains("trace")) {
      const json& t = j.at("trace");
      check_keys(t, {"preset", "file", "requests", "seed", "zipf_exponent"}, "trace");
      take(t, "preset", cfg.trace.preset);
      take(t, "file", cfg.trace.file);
      take(t, "requests", cfg.trace.requests);
      take(t, "seed", cfg.trace.seed);
      if (t.contains("zipf_exponent")) cfg.trace.zipf_exponent = t.at("zipf_exponent").get<double>();
    }
    if (j.contains("modes")) {
      cfg.modes.clear();
      for (const auto& m : j.at("modes")) cfg.modes.push_back(parse_mode(m.get<std::string>()));
    }
    take(j, "qps", cfg.qps);
    if (j.contains("policy")) parse_policy(j.at("policy"), cfg.policy);
    if (j.contains("timing")) parse_timing(j.at("timing"), cfg.timing);
    if (j.contains("energy")) parse_energy(j.at("energy"), cfg.energy);
    if (j.contains("topology")) {
      const json& t = j.at("topology");
      check_keys(t, {"banks", "capacity_banks", "tokenstack_split", "pcie_bw"}, "topology");
      if (t.contains("banks")) cfg.banks = t.at("banks").get<uint32_t>();
      if (t.contains("capacity_banks")) cfg.capacity_banks = t.at("capacity_banks").get<uint32_t>();
      if (t.contains("tokenstack_split")) {
        auto v = t.at("tokenstack_split").get<std::vector<uint32_t>>();
        if (v.size() != 2) throw std::invalid_argument("tokenstack_split needs [cap, comp]");
        cfg.tokenstack_split = std::make_pair(v[0], v[1]);
      }
      if (t.contains("pcie_bw")) cfg.pcie_bw = t.at("pcie_bw").get<double>();
    }
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    take(j, "seed", cfg.seed);
    take(j, "threads", cfg.threads);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad config value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

NodeTopology topology_for(const ExperimentConfig& cfg, Mode mode) {
  NodeTopology t = topology_preset(mode);
  if (mode == Mode::kTokenStack && cfg.tokenstack_split)
    t = tokenstack_split(cfg.tokenstack_split->first, cfg.tokenstack_split->second);
  if (cfg.banks) t.stack.B = *cfg.banks;
  if (cfg.capacity_banks) t.stack.B_cap = *cfg.capacity_banks;
  if (cfg.pcie_bw) t.pcie_bw = *cfg.pcie_bw;
  t.validate();
  return t;
}

Trace build_trace(const TraceSource& src) {
  if (!src.file.empty()) return load_trace(src.file);
  TraceSpec spec = trace_preset(src.preset);
  spec.num_requests = src.requests;
  spec.seed = src.seed;
  if (src.zipf_exponent) spec.zipf_exponent = *src.zipf_exponent;
  return synthesize_trace(spec);
}

CellSummary summarize(Mode mode, double qps, const RunMetrics& m) {
  CellSummary c;
  c.mode = mode;
  c.qps = qps;
  c.feasible = m.feasible;
  c.verdict = m.verdict;
  c.requests = m.requests;
  if (!m.feasible) return c;
  c.makespan = m.makespan;
  c.generated_tokens = m.generated_tokens;
  c.token_throughput = m.token_throughput;
  c.request_throughput = m.request_throughput;
  if (!m.ttft.empty()) {
    c.ttft_p50 = percentile(m.ttft, 50);
    c.ttft_p95 = percentile(m.ttft, 95);
    c.e2e_p50 = percentile(m.e2e, 50);
    c.e2e_p95 = percentile(m.e2e, 95);
    c.queue_delay_mean = std::accumulate(m.queue_delay.begin(), m.queue_delay.end(), 0.0) / m.queue_delay.size();
  }
  if (!m.tbt.empty()) {
    c.tbt_p50 = percentile(m.tbt, 50);
    c.tbt_p95 = percentile(m.tbt, 95);
  }
  c.compute_hit_rate = m.compute_hit_rate;
  c.compute_byte_hit_rate = m.compute_byte_hit_rate;
  c.energy = m.energy;
  c.energy_per_token = m.energy_per_token;
  c.transfers = m.transfers;
  c.ledger_residual = m.ledger.residual_fp16();
  c.steps = m.steps;
  return c;
}

const CellSummary* SweepResult::cell(Mode mode, double q) const {
  for (const auto& c : cells)
    if (c.mode == mode && c.qps == q) return &c;
  return nullptr;
}

void derive_tables(SweepResult& r) {
  r.slo_capacity.clear();
  r.geomean_normalized.clear();
  for (auto& c : r.cells) {
    const CellSummary* base = r.cell(Mode::kAttAcc, c.qps);
    c.normalized_throughput = c.feasible && base && base->feasible && base->token_throughput > 0
                                  ? c.token_throughput / base->token_throughput
                                  : 0.0;
  }
  for (Mode m : r.modes) {
    std::vector<double> q, p50, norm;
    std::vector<bool> ok;
    for (const auto& c : r.cells) {
      if (c.mode != m) continue;
      q.push_back(c.qps);
      p50.push_back(c.e2e_p50);
      ok.push_back(c.feasible && c.requests > 0);
      if (c.normalized_throughput > 0) norm.push_back(c.normalized_throughput);
    }
    const std::string name(to_string(m));
    r.slo_capacity[name] = slo_capacity(q, p50, ok);
    r.geomean_normalized[name] = geomean(norm);
  }
}

SweepResult run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const Trace base = build_trace(cfg.trace);
  SweepResult r;
  r.model = cfg.model.name;
  r.trace = cfg.trace.file.empty() ? cfg.trace.preset : cfg.trace.file;
  r.qps = cfg.qps;
  r.modes = cfg.modes;
  std::vector<Trace> traces;
  for (double q : cfg.qps) traces.push_back(base.requests.empty() ? base : rescale_qps(base, q));
  std::vector<NodeTopology> topos;
  for (Mode m : cfg.modes) topos.push_back(topology_for(cfg, m));

  const size_t nq = cfg.qps.size();
  const size_t cells = cfg.modes.size() * nq;
  r.cells.resize(cells);
  std::atomic<size_t> next{0};
  std::vector<std::string> errors(cells);
  auto worker = [&] {
    for (size_t i = next++; i < cells; i = next++) {
      const size_t mi = i / nq, qi = i % nq;
      try {
        const RunMetrics m = run(cfg.model, traces[qi], topos[mi], cfg.policy, cfg.timing, cfg.energy, cfg.seed);
        r.cells[i] = summarize(cfg.modes[mi], cfg.qps[qi], m);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<size_t>(threads, cells));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (!e.empty()) throw std::runtime_error("sweep cell failed: " + e);
  derive_tables(r);
  return r;
}

namespace {

json energy_json(const EnergyBreakdown& e) {
  return {{"fc_offchip", e.fc_offchip},   {"attn_offchip", e.attn_offchip}, {"fc_onchip", e.fc_onchip},
          {"attn_onchip", e.attn_onchip}, {"communication", e.communication}, {"total", e.total()}};
}

EnergyBreakdown energy_from(const json& j) {
  EnergyBreakdown e;
  e.fc_offchip = j.at("fc_offchip");
  e.attn_offchip = j.at("attn_offchip");
  e.fc_onchip = j.at("fc_onchip");
  e.attn_onchip = j.at("attn_onchip");
  e.communication = j.at("communication");
  return e;
}

json transfers_json(const TransferTotals& t) {
  json kinds = json::object();
  for (TransferKind k : kAllTransferKinds) kinds[std::string(to_string(k))] = t.bytes_by_kind[size_t(k)];
  return {{"by_kind", kinds},       {"foreground", t.foreground_bytes}, {"background", t.background_bytes},
          {"tsv", t.tsv_bytes},     {"ucie", t.ucie_bytes},             {"nvlink", t.nvlink_bytes},
          {"pcie", t.pcie_bytes}};
}

TransferTotals transfers_from(const json& j) {
  TransferTotals t;
  for (TransferKind k : kAllTransferKinds) t.bytes_by_kind[size_t(k)] = j.at("by_kind").at(std::string(to_string(k)));
  t.foreground_bytes = j.at("foreground");
  t.background_bytes = j.at("background");
  t.tsv_bytes = j.at("tsv");
  t.ucie_bytes = j.at("ucie");
  t.nvlink_bytes = j.at("nvlink");
  t.pcie_bytes = j.at("pcie");
  return t;
}

json cell_json(const CellSummary& c) {
  return {{"mode", to_string(c.mode)},
          {"qps", c.qps},
          {"feasible", c.feasible},
          {"verdict", c.verdict},
          {"requests", c.requests},
          {"makespan", c.makespan},
          {"generated_tokens", c.generated_tokens},
          {"token_throughput", c.token_throughput},
          {"request_throughput", c.request_throughput},
          {"ttft_p50", c.ttft_p50},
          {"ttft_p95", c.ttft_p95},
          {"tbt_p50", c.tbt_p50},
          {"tbt_p95", c.tbt_p95},
          {"e2e_p50", c.e2e_p50},
          {"e2e_p95", c.e2e_p95},
          {"queue_delay_mean", c.queue_delay_mean},
          {"compute_hit_rate", c.compute_hit_rate},
          {"compute_byte_hit_rate", c.compute_byte_hit_rate},
          {"energy", energy_json(c.energy)},
          {"energy_per_token", c.energy_per_token},
          {"transfers", transfers_json(c.transfers)},
          {"ledger_residual", c.ledger_residual},
          {"steps", c.steps},
          {"normalized_throughput", c.normalized_throughput}};
}

CellSummary cell_from(const json& j) {
  CellSummary c;
  c.mode = parse_mode(j.at("mode").get<std::string>());
  c.qps = j.at("qps");
  c.feasible = j.at("feasible");
  c.verdict = j.at("verdict");
  c.requests = j.at("requests");
  c.makespan = j.at("makespan");
  c.generated_tokens = j.at("generated_tokens");
  c.token_throughput = j.at("token_throughput");
  c.request_throughput = j.at("request_throughput");
  c.ttft_p50 = j.at("ttft_p50");
  c.ttft_p95 = j.at("ttft_p95");
  c.tbt_p50 = j.at("tbt_p50");
  c.tbt_p95 = j.at("tbt_p95");
  c.e2e_p50 = j.at("e2e_p50");
  c.e2e_p95 = j.at("e2e_p95");
  c.queue_delay_mean = j.at("queue_delay_mean");
  c.compute_hit_rate = j.at("compute_hit_rate");
  c.compute_byte_hit_rate = j.at("compute_byte_hit_rate");
  c.energy = energy_from(j.at("energy"));
  c.energy_per_token = j.at("energy_per_token");
  c.transfers = transfers_from(j.at("transfers"));
  c.ledger_residual = j.at("ledger_residual");
  c.steps = j.at("steps");
  c.normalized_throughput = j.at("normalized_throughput");
  return c;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + p.string());
}

}  // namespace

std::string to_json(const SweepResult& r) {
  json j;
  j["model"] = r.model;
  j["trace"] = r.trace;
  j["qps"] = r.qps;
  json modes = json::array();
  for (Mode m : r.modes) modes.push_back(to_string(m));
  j["modes"] = modes;
  json cells = json::array();
  for (const auto& c : r.cells) cells.push_back(cell_json(c));
  j["cells"] = cells;
  j["slo_capacity"] = r.slo_capacity;
  j["geomean_normalized_throughput"] = r.geomean_normalized;
  return j.dump(2) + "\n";
}

SweepResult sweep_from_json(const std::string& text) {
  SweepResult r;
  try {
    const json j = json::parse(text);
    r.model = j.at("model");
    r.trace = j.at("trace");
    r.qps = j.at("qps").get<std::vector<double>>();
    for (const auto& m : j.at("modes")) r.modes.push_back(parse_mode(m.get<std::string>()));
    for (const auto& c : j.at("cells")) r.cells.push_back(cell_from(c));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad sweep summary: ") + e.what());
  }
  derive_tables(r);
  return r;
}

std::string metrics_to_json(const RunMetrics& m, Mode mode, double qps) {
  json j = cell_json(summarize(mode, qps, m));
  j["hits"] = {{"compute", m.compute_hits}, {"capacity", m.capacity_hits}, {"remote", m.remote_hits},
               {"miss", m.misses}};
  j["ledger"] = {{"demoted", m.ledger.demoted_fp16},   {"promoted", m.ledger.promoted_fp16},
                 {"resident", m.ledger.resident_fp16}, {"gc", m.ledger.gc_fp16},
                 {"residual_fp16", m.ledger.residual_fp16()}, {"residual_stored", m.ledger.residual_stored()}};
  const auto& p = m.policy;
  j["policy"] = {{"demotions", p.demotions},       {"promotions", p.promotions}, {"callbacks", p.callbacks},
                 {"replications", p.replications}, {"revocations", p.revocations}, {"discards", p.discards},
                 {"gc", p.gc},                     {"host_spills", p.host_spills}, {"refits", p.refits},
                 {"layout_tm_dh", p.layout_choices[0]}, {"layout_tm_tm", p.layout_choices[1]},
                 {"layout_dh_dh", p.layout_choices[2]}};
  j["peak_compute_fraction"] = m.peak_compute_fraction;
  j["capacity_violation_bytes"] = m.capacity_violation_bytes;
  j["events"] = m.events;
  return j.dump(2) + "\n";
}

void emit_report(const SweepResult& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "summary.json", to_json(r));

  std::ostringstream cells;
  cells << "mode,qps,feasible,requests,makespan_s,generated_tokens,token_throughput,request_throughput,"
           "ttft_p50,ttft_p95,tbt_p50,tbt_p95,e2e_p50,e2e_p95,queue_delay_mean,compute_hit_rate,"
           "compute_byte_hit_rate,energy_per_token_j,normalized_throughput,steps\n";
  for (const auto& c : r.cells) {
    cells << to_string(c.mode) << ',' << fmt(c.qps) << ',' << (c.feasible ? "yes" : "no") << ',' << c.requests;
    for (double v : {c.makespan, c.generated_tokens, c.token_throughput, c.request_throughput, c.ttft_p50,
                     c.ttft_p95, c.tbt_p50, c.tbt_p95, c.e2e_p50, c.e2e_p95, c.queue_delay_mean,
                     c.compute_hit_rate, c.compute_byte_hit_rate, c.energy_per_token, c.normalized_throughput})
      cells << ',' << fmt(v);
    cells << ',' << c.steps << '\n';
  }
  write_file(dir / "cells.csv", cells.str());

  std::ostringstream energy;
  energy << "mode,qps,fc_offchip,attn_offchip,fc_onchip,attn_onchip,communication,total\n";
  for (const auto& c : r.cells) {
    const double tok = c.generated_tokens > 0 ? c.generated_tokens : 1.0;
    const auto& e = c.energy;
    energy << to_string(c.mode) << ',' << fmt(c.qps);
    for (double v : {e.fc_offchip, e.attn_offchip, e.fc_onchip, e.attn_onchip, e.communication, e.total()})
      energy << ',' << fmt(v / tok);
    energy << '\n';
  }
  write_file(dir / "energy.csv", energy.str());

  std::ostringstream slo;
  slo << "mode,slo_capacity_qps,geomean_normalized_throughput\n";
  for (Mode m : r.modes) {
    const std::string name(to_string(m));
    slo << name << ',' << fmt(r.slo_capacity.at(name)) << ',' << fmt(r.geomean_normalized.at(name)) << '\n';
  }
  write_file(dir / "slo.csv", slo.str());
}

}  // namespace stacksim
