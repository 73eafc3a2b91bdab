// Copyright 2026 The StackSim Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stacksim/harness.h"

namespace stacksim {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("stacksim_harness_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig small_config(std::vector<Mode> modes, std::vector<double> qps, const char* model = "qwen3-4b") {
  ExperimentConfig cfg;
  cfg.model = model_preset(model);
  cfg.trace.preset = "traceB";
  cfg.trace.requests = 120;
  cfg.modes = std::move(modes);
  cfg.qps = std::move(qps);
  cfg.threads = 1;
  return cfg;
}

TEST(Harness, PercentileNearestRank) {
  EXPECT_EQ(percentile({1, 2, 3, 4}, 50), 2.0);
  EXPECT_EQ(percentile({4, 3, 2, 1}, 100), 4.0);
  EXPECT_EQ(percentile({4, 3, 2, 1}, 0), 1.0);
  EXPECT_EQ(percentile({1, 2, 3, 4}, 95), 4.0);
  for (double p : {0.0, 37.0, 50.0, 100.0}) EXPECT_EQ(percentile({7.5}, p), 7.5);
  EXPECT_THROW(percentile({}, 50), std::invalid_argument);
  EXPECT_THROW(percentile({1.0}, 101), std::invalid_argument);
}

TEST(HarnessProperty, PercentileIsMemberAndMonotone) {
  std::mt19937_64 rng(67);
  std::uniform_real_distribution<double> u(0, 100);
  std::uniform_int_distribution<int> n(1, 200);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> xs(n(rng));
    for (double& x : xs) x = u(rng);
    double prev = -1;
    for (double p = 0; p <= 100; p += 5) {
      const double v = percentile(xs, p);
      EXPECT_NE(std::find(xs.begin(), xs.end(), v), xs.end());
      EXPECT_GE(v, prev);
      // Nearest rank: at least p% of the values are <= v.
      const double le = static_cast<double>(std::count_if(xs.begin(), xs.end(), [&](double x) { return x <= v; }));
      EXPECT_GE(le / static_cast<double>(xs.size()) * 100.0, p - 1e-9);
      prev = v;
    }
  }
}

TEST(Harness, SloCapacityExamples) {
  const std::vector<bool> all(4, true);
  EXPECT_EQ(slo_capacity({1, 2, 3, 4}, {1.0, 1.1, 1.9, 5.0}, all), 3.0);
  EXPECT_EQ(slo_capacity({1, 2, 3, 4}, {1, 1, 1, 1}, all), 4.0);
  EXPECT_EQ(slo_capacity({1, 2, 3, 4}, {1.0, 1.1, 1.9, 5.0}, {true, true, false, true}), 2.0);
  EXPECT_EQ(slo_capacity({1, 2}, {1, 1}, {false, false}), 0.0);
  // Threshold is inclusive.
  EXPECT_EQ(slo_capacity({1, 2}, {1.0, 2.0}, {true, true}), 2.0);
}

TEST(HarnessProperty, SloCapacityMemberAndMonotoneInFactor) {
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> lat(0.1, 10.0);
  std::bernoulli_distribution ok(0.8);
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> q = {0.5, 1, 2, 4, 8}, p(5);
    std::vector<bool> f(5);
    for (size_t k = 0; k < 5; ++k) {
      p[k] = lat(rng);
      f[k] = ok(rng);
    }
    double prev = 0.0;
    for (double factor : {1.0, 1.5, 2.0, 3.0, 10.0}) {
      const double c = slo_capacity(q, p, f, factor);
      EXPECT_TRUE(c == 0.0 || std::find(q.begin(), q.end(), c) != q.end());
      EXPECT_GE(c, prev);
      prev = c;
    }
  }
}

TEST(Harness, GeomeanAndPearson) {
  EXPECT_NEAR(geomean({1, 4}), 2.0, 1e-12);
  EXPECT_NEAR(geomean({2, 8, 4}), std::exp((std::log(2) + std::log(8) + std::log(4)) / 3), 1e-12);
  EXPECT_THROW(geomean({1, 0}), std::invalid_argument);
  EXPECT_NEAR(pearson({1, 2, 3}, {2, 4, 6}), 1.0, 1e-12);
  EXPECT_NEAR(pearson({1, 2, 3}, {3, 2, 1}), -1.0, 1e-12);
  EXPECT_TRUE(std::isnan(pearson({1, 1, 1}, {1, 2, 3})));
  // Hand-computed: x = {1,2,3,4}, y = {1,3,2,4}: sxy = 4, sxx = syy = 5.
  EXPECT_NEAR(pearson({1, 2, 3, 4}, {1, 3, 2, 4}), 0.8, 1e-12);
}

TEST(Harness, ParseConfigAcceptsDocumentedKeys) {
  const ExperimentConfig cfg = parse_config(R"({
    "model": {"preset": "gpt-175b"},
    "trace": {"preset": "traceB", "requests": 50, "seed": 3},
    "modes": ["TokenStack", "AttAcc"],
    "qps": [0.5, 1.0],
    "policy": {"theta_hi": 0.9, "theta_lo": 0.8, "ablation": {"layout": false}},
    "timing": {"t_fixed_step": 1e-4},
    "energy": {"tsv_pj_per_byte": 2.0},
    "topology": {"pcie_bw": 64e9},
    "seed": 7
  })");
  EXPECT_EQ(cfg.model.layers, 96u);
  EXPECT_EQ(cfg.trace.requests, 50u);
  EXPECT_EQ(cfg.modes.size(), 2u);
  EXPECT_EQ(cfg.qps, (std::vector<double>{0.5, 1.0}));
  EXPECT_DOUBLE_EQ(cfg.policy.eviction.theta_hi, 0.9);
  EXPECT_FALSE(cfg.policy.ablation.layout);
  EXPECT_DOUBLE_EQ(cfg.timing.t_fixed_step, 1e-4);
  EXPECT_DOUBLE_EQ(cfg.energy.tsv_pj_per_byte, 2.0);
  EXPECT_DOUBLE_EQ(topology_for(cfg, Mode::kTokenStack).pcie_bw, 64e9);
  EXPECT_EQ(cfg.seed, 7u);
}

TEST(Harness, ParseConfigRejectsBadInput) {
  EXPECT_THROW(parse_config(R"({"qps": [1], "bogus": 1})"), std::invalid_argument);
  EXPECT_THROW(parse_config(R"({"policy": {"thetahi": 0.9}})"), std::invalid_argument);
  EXPECT_THROW(parse_config(R"({"qps": []})"), std::invalid_argument);
  EXPECT_THROW(parse_config(R"({"qps": [0]})"), std::invalid_argument);
  EXPECT_THROW(parse_config("{not json"), std::invalid_argument);
}

TEST(Harness, SweepGridCompleteAndNormalized) {
  const SweepResult r = run_sweep(small_config({Mode::kTokenStack, Mode::kAttAcc}, {1.0, 4.0, 16.0}));
  ASSERT_EQ(r.cells.size(), 6u);
  for (Mode m : {Mode::kTokenStack, Mode::kAttAcc}) {
    for (double q : {1.0, 4.0, 16.0}) {
      const CellSummary* c = r.cell(m, q);
      ASSERT_NE(c, nullptr);
      EXPECT_TRUE(c->feasible);
      EXPECT_EQ(c->requests, 120u);
      if (m == Mode::kAttAcc) {
        EXPECT_DOUBLE_EQ(c->normalized_throughput, 1.0);
      }
      const EnergyBreakdown& e = c->energy;
      EXPECT_NEAR(e.fc_offchip + e.attn_offchip + e.fc_onchip + e.attn_onchip + e.communication, e.total(),
                  1e-12 * e.total());
    }
  }
  for (const auto& [mode, cap] : r.slo_capacity)
    EXPECT_TRUE(cap == 0.0 || std::find(r.qps.begin(), r.qps.end(), cap) != r.qps.end()) << mode;
  std::vector<double> ratios;
  for (double q : r.qps) ratios.push_back(r.cell(Mode::kTokenStack, q)->normalized_throughput);
  EXPECT_NEAR(r.geomean_normalized.at("TokenStack"), geomean(ratios), 1e-12);
}

TEST(Harness, InfeasibleCellsPropagate) {
  const SweepResult r = run_sweep(small_config({Mode::kUniform, Mode::kAttAcc}, {1.0, 2.0}, "gpt-175b"));
  ASSERT_EQ(r.cells.size(), 4u);
  for (double q : {1.0, 2.0}) {
    EXPECT_FALSE(r.cell(Mode::kUniform, q)->feasible);
    EXPECT_TRUE(r.cell(Mode::kAttAcc, q)->feasible);
  }
  EXPECT_EQ(r.slo_capacity.at("Uniform"), 0.0);
  const std::string json = to_json(r);
  EXPECT_NE(json.find("\"feasible\": false"), std::string::npos);
}

TEST(Harness, ThreadCountDoesNotChangeResults) {
  ExperimentConfig cfg = small_config({Mode::kTokenStack, Mode::kAttAcc, Mode::kFullGPU}, {2.0, 8.0});
  const std::string serial = to_json(run_sweep(cfg));
  cfg.threads = 4;
  EXPECT_EQ(to_json(run_sweep(cfg)), serial);
}

TEST(Harness, JsonRoundTrip) {
  const SweepResult r = run_sweep(small_config({Mode::kTokenStack, Mode::kAttAcc}, {2.0, 8.0}));
  const std::string text = to_json(r);
  const SweepResult back = sweep_from_json(text);
  EXPECT_EQ(to_json(back), text);
  ASSERT_EQ(back.cells.size(), r.cells.size());
  EXPECT_EQ(back.cells[0].token_throughput, r.cells[0].token_throughput);
}

TEST(Harness, EmitReportDeterministicWithHeaders) {
  const ExperimentConfig cfg = small_config({Mode::kTokenStack, Mode::kAttAcc}, {2.0, 8.0});
  const fs::path a = scratch_dir("a"), b = scratch_dir("b");
  emit_report(run_sweep(cfg), a);
  emit_report(run_sweep(cfg), b);
  for (const char* f : {"summary.json", "cells.csv", "energy.csv", "slo.csv"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  std::istringstream energy(slurp(a / "energy.csv"));
  std::string line;
  std::getline(energy, line);
  EXPECT_EQ(line, "mode,qps,fc_offchip,attn_offchip,fc_onchip,attn_onchip,communication,total");
  while (std::getline(energy, line)) {
    const auto v = split(line, ',');
    ASSERT_EQ(v.size(), 8u);
    double sum = 0.0;
    for (size_t i = 2; i < 7; ++i) sum += std::stod(v[i]);
    EXPECT_NEAR(sum, std::stod(v[7]), 1e-6 * std::stod(v[7]));
  }
  std::istringstream cells(slurp(a / "cells.csv"));
  std::getline(cells, line);
  EXPECT_EQ(line.rfind("mode,qps,feasible", 0), 0u);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Harness, EmitReportUnwritableDirectoryThrows) {
  const fs::path f = scratch_dir("file");
  std::ofstream(f) << "x";
  EXPECT_ANY_THROW(emit_report(SweepResult{}, f / "sub"));
  fs::remove_all(f);
}

}  // namespace
}  // namespace stacksim
