// Copyright 2026 The StackSim Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line driver: run, sweep, synth, stats, report.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "stacksim/harness.h"

using namespace stacksim;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven simulator for heterogeneous HBM-PIM LLM serving"};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "Simulate one (mode, qps) cell");
  std::string run_config, run_mode = "TokenStack", run_out;
  double run_qps = 0.0;
  bool run_log = false;
  run_cmd->add_option("-c,--config", run_config, "Experiment config (JSON)");
  run_cmd->add_option("-m,--mode", run_mode, "TokenStack, AttAcc, FullGPU or Uniform");
  run_cmd->add_option("-q,--qps", run_qps, "Target arrival rate; defaults to the first config qps");
  run_cmd->add_option("-o,--out", run_out, "Output file for metrics JSON (default stdout)");
  run_cmd->add_flag("--policy-log", run_log, "Also write the policy event log as JSONL next to --out");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Run every (mode, qps) cell of a config");
  std::string sweep_config, sweep_out;
  unsigned sweep_threads = 0;
  sweep_cmd->add_option("-c,--config", sweep_config, "Experiment config (JSON)")->required();
  sweep_cmd->add_option("-o,--out", sweep_out, "Output directory (overrides output_dir)");
  sweep_cmd->add_option("-j,--threads", sweep_threads, "Worker threads (overrides config)");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Synthesize a trace from a preset");
  std::string synth_preset = "traceB", synth_out;
  size_t synth_n = 1000;
  uint64_t synth_seed = 1;
  double synth_qps = 0.0, synth_zipf = -1.0, synth_target = -1.0;
  synth_cmd->add_option("-p,--preset", synth_preset, "traceB, traceA, coder or thinking");
  synth_cmd->add_option("-n,--requests", synth_n, "Number of requests");
  synth_cmd->add_option("-s,--seed", synth_seed, "Random seed");
  synth_cmd->add_option("-q,--qps", synth_qps, "Arrival rate (default: preset)");
  synth_cmd->add_option("--zipf", synth_zipf, "Prefix popularity exponent (default: preset)");
  synth_cmd->add_option("--target-top10", synth_target,
                        "Tune the exponent so the top 10% of blocks take this share of reuse");
  synth_cmd->add_option("-o,--out", synth_out, "Output JSONL path")->required();

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "Summarize a trace");
  std::string stats_trace, stats_preset, stats_out;
  size_t stats_n = 1000;
  uint64_t stats_seed = 1;
  stats_cmd->add_option("-t,--trace", stats_trace, "JSONL trace file");
  stats_cmd->add_option("-p,--preset", stats_preset, "Synthesize from a preset instead");
  stats_cmd->add_option("-n,--requests", stats_n, "Requests when synthesizing");
  stats_cmd->add_option("-s,--seed", stats_seed, "Seed when synthesizing");
  stats_cmd->add_option("-o,--out", stats_out, "Output file (default stdout)");

  // report
  auto* report_cmd = app.add_subcommand("report", "Re-emit tables from a stored summary.json");
  std::string report_in, report_out;
  report_cmd->add_option("-i,--in", report_in, "summary.json from a sweep")->required();
  report_cmd->add_option("-o,--out", report_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      ExperimentConfig cfg = run_config.empty() ? ExperimentConfig{} : load_config(run_config);
      const Mode mode = parse_mode(run_mode);
      const double qps = run_qps > 0 ? run_qps : cfg.qps.front();
      Trace trace = build_trace(cfg.trace);
      if (!trace.requests.empty()) trace = rescale_qps(trace, qps);
      RunOptions opts;
      opts.policy_log = run_log;
      const RunMetrics m =
          run(cfg.model, trace, topology_for(cfg, mode), cfg.policy, cfg.timing, cfg.energy, cfg.seed, opts);
      write_or_print(run_out, metrics_to_json(m, mode, qps));
      if (run_log) {
        std::string log;
        for (const auto& line : m.policy_log) log += line + "\n";
        write_or_print(run_out.empty() ? "policy_log.jsonl" : run_out + ".policy.jsonl", log);
      }
      return 0;
    }
    if (*sweep_cmd) {
      ExperimentConfig cfg = load_config(sweep_config);
      if (!sweep_out.empty()) cfg.output_dir = sweep_out;
      if (sweep_threads) cfg.threads = sweep_threads;
      const SweepResult r = run_sweep(cfg);
      emit_report(r, cfg.output_dir);
      for (const auto& [mode, cap] : r.slo_capacity)
        std::cout << mode << ": slo_capacity=" << cap << " geomean_norm=" << r.geomean_normalized.at(mode) << "\n";
      return 0;
    }
    if (*synth_cmd) {
      TraceSpec spec = trace_preset(synth_preset);
      spec.num_requests = synth_n;
      spec.seed = synth_seed;
      if (synth_qps > 0) spec.qps = synth_qps;
      if (synth_zipf >= 0) spec.zipf_exponent = synth_zipf;
      if (synth_target > 0) {
        spec.zipf_exponent = tune_zipf_exponent(spec, synth_target);
        std::cerr << "zipf_exponent=" << spec.zipf_exponent << "\n";
      }
      save_trace(synthesize_trace(spec), synth_out);
      return 0;
    }
    if (*stats_cmd) {
      Trace t;
      if (!stats_trace.empty()) {
        t = load_trace(stats_trace);
      } else if (!stats_preset.empty()) {
        TraceSpec spec = trace_preset(stats_preset);
        spec.num_requests = stats_n;
        spec.seed = stats_seed;
        t = synthesize_trace(spec);
      } else {
        throw std::invalid_argument("stats needs --trace or --preset");
      }
      write_or_print(stats_out, trace_stats_to_json(trace_stats(t)) + "\n");
      return 0;
    }
    if (*report_cmd) {
      emit_report(sweep_from_json(slurp(report_in)), report_out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
