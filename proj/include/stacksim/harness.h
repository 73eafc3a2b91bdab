// Copyright 2026 The StackSim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stacksim/engine.h"

namespace stacksim {

// Nearest-rank percentile, p in [0, 100]. Throws on an empty series.
double percentile(std::vector<double> series, double p);

// Largest qps whose p50 latency stays within factor x the minimum of the
// feasible points; 0 when nothing is feasible.
double slo_capacity(const std::vector<double>& qps, const std::vector<double>& p50,
                    const std::vector<bool>& feasible, double factor = 2.0);

double geomean(const std::vector<double>& xs);

// Pearson correlation; NaN when either series is constant.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

struct TraceSource {
  std::string preset = "traceB";
  std::string file;  // takes precedence when set
  size_t requests = 1000;
  uint64_t seed = 1;
  std::optional<double> zipf_exponent;
};

struct ExperimentConfig {
  ModelConfig model = model_preset("qwen3-4b");
  TraceSource trace;
  std::vector<Mode> modes = {Mode::kTokenStack, Mode::kAttAcc};
  std::vector<double> qps = {1.0};
  PolicyConfig policy;
  TimingParams timing;
  EnergyParams energy;
  // Applied on top of each mode preset.
  std::optional<uint32_t> banks;
  std::optional<uint32_t> capacity_banks;
  std::optional<std::pair<uint32_t, uint32_t>> tokenstack_split;  // (cap, comp) layers
  std::optional<double> pcie_bw;
  std::filesystem::path output_dir = "out";
  uint64_t seed = 1;
  unsigned threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

// Parses the documented JSON schema. Unknown keys are rejected.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

NodeTopology topology_for(const ExperimentConfig& cfg, Mode mode);
Trace build_trace(const TraceSource& src);

struct CellSummary {
  Mode mode = Mode::kTokenStack;
  double qps = 0.0;
  bool feasible = true;
  std::string verdict = "ok";
  size_t requests = 0;
  double makespan = 0.0;
  double generated_tokens = 0.0;
  double token_throughput = 0.0;
  double request_throughput = 0.0;
  double ttft_p50 = 0.0, ttft_p95 = 0.0;
  double tbt_p50 = 0.0, tbt_p95 = 0.0;
  double e2e_p50 = 0.0, e2e_p95 = 0.0;
  double queue_delay_mean = 0.0;
  double compute_hit_rate = 0.0;
  double compute_byte_hit_rate = 0.0;
  EnergyBreakdown energy;
  double energy_per_token = 0.0;
  TransferTotals transfers;
  double ledger_residual = 0.0;
  uint64_t steps = 0;
  double normalized_throughput = 0.0;  // vs. AttAcc at the same qps; 0 if unavailable
};

CellSummary summarize(Mode mode, double qps, const RunMetrics& m);

struct SweepResult {
  std::string model;
  std::string trace;
  std::vector<double> qps;
  std::vector<Mode> modes;
  std::vector<CellSummary> cells;  // mode-major, qps-minor
  std::map<std::string, double> slo_capacity;
  std::map<std::string, double> geomean_normalized;

  const CellSummary* cell(Mode mode, double qps) const;
};

// Runs every (mode, qps) cell, concurrently when threads > 1.
SweepResult run_sweep(const ExperimentConfig& cfg);
// Fills normalization, SLO capacity and geomeans from the cells.
void derive_tables(SweepResult& r);

std::string to_json(const SweepResult& r);
SweepResult sweep_from_json(const std::string& text);
std::string metrics_to_json(const RunMetrics& m, Mode mode, double qps);

// summary.json, cells.csv, energy.csv, slo.csv.
void emit_report(const SweepResult& r, const std::filesystem::path& dir);

}  // namespace stacksim
