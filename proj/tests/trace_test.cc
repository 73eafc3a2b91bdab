// Copyright 2026 The StackSim Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "stacksim/trace.h"

namespace stacksim {
namespace {

namespace fs = std::filesystem;

Request make_request(uint64_t id, double arrival, uint32_t prompt, uint32_t gen = 1,
                     Category c = Category::kApi) {
  Request r;
  r.id = id;
  r.arrival = arrival;
  r.category = c;
  r.prompt_len = prompt;
  r.gen_len = gen;
  for (uint32_t i = 0; i < blocks_for_tokens(prompt); ++i) r.block_ids.push_back(id * 1000 + i);
  return r;
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("stacksim_trace_test_" + name);
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p);
  for (const auto& l : lines) out << l << "\n";
}

// Independent reuse counter: share of reuse events on the top fraction of blocks.
double oracle_top_share(const Trace& t, double fraction) {
  std::map<uint64_t, uint64_t> seen;
  for (const auto& r : t.requests)
    for (uint64_t b : r.block_ids) ++seen[b];
  std::vector<uint64_t> reuse;
  uint64_t total = 0;
  for (const auto& [b, c] : seen) {
    reuse.push_back(c - 1);
    total += c - 1;
  }
  std::sort(reuse.rbegin(), reuse.rend());
  const size_t n = static_cast<size_t>(std::ceil(fraction * static_cast<double>(reuse.size()) - 1e-9));
  uint64_t top = 0;
  for (size_t i = 0; i < n && i < reuse.size(); ++i) top += reuse[i];
  return total == 0 ? 0.0 : static_cast<double>(top) / static_cast<double>(total);
}

TEST(Trace, BlocksForTokens) {
  EXPECT_EQ(blocks_for_tokens(0), 0u);
  EXPECT_EQ(blocks_for_tokens(1), 1u);
  EXPECT_EQ(blocks_for_tokens(16), 1u);
  EXPECT_EQ(blocks_for_tokens(17), 2u);
}

TEST(Trace, CategoryRoundTrip) {
  for (Category c : kAllCategories) EXPECT_EQ(parse_category(to_string(c)), c);
  EXPECT_THROW(parse_category("chat"), std::invalid_argument);
}

TEST(Trace, LoadTwoRequestsGivesRawQpsTwo) {
  const auto p = temp_file("two.jsonl");
  write_lines(p, {request_to_json_line(make_request(1, 0.0, 20)),
                  request_to_json_line(make_request(2, 1.0, 20))});
  const Trace t = load_trace(p);
  ASSERT_EQ(t.requests.size(), 2u);
  EXPECT_DOUBLE_EQ(t.raw_qps, 2.0);
  fs::remove(p);
}

TEST(Trace, MalformedLineNamesLineNumber) {
  const auto p = temp_file("bad.jsonl");
  write_lines(p, {request_to_json_line(make_request(1, 0.0, 20)),
                  request_to_json_line(make_request(2, 1.0, 20)), "{\"id\": 3, \"arrival_s\": "});
  try {
    load_trace(p);
    FAIL() << "expected a parse error";
  } catch (const TraceParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  fs::remove(p);
}

TEST(Trace, EmptyFileIsAnError) {
  const auto p = temp_file("empty.jsonl");
  write_lines(p, {});
  EXPECT_ANY_THROW(load_trace(p));
  fs::remove(p);
}

TEST(Trace, BlockCountMismatchRejected) {
  const auto p = temp_file("mismatch.jsonl");
  Request r = make_request(1, 0.0, 40);
  r.block_ids.pop_back();
  write_lines(p, {request_to_json_line(r)});
  EXPECT_THROW(load_trace(p), TraceParseError);
  fs::remove(p);
}

TEST(Trace, OutOfOrderArrivalsAreSortedAndCounted) {
  const auto p = temp_file("order.jsonl");
  write_lines(p, {request_to_json_line(make_request(1, 2.0, 20)),
                  request_to_json_line(make_request(2, 1.0, 20)),
                  request_to_json_line(make_request(3, 3.0, 20))});
  const Trace t = load_trace(p);
  EXPECT_EQ(t.requests[0].id, 2u);
  EXPECT_GE(t.reordered, 1u);
  for (size_t i = 1; i < t.requests.size(); ++i)
    EXPECT_LE(t.requests[i - 1].arrival, t.requests[i].arrival);
  fs::remove(p);
}

TEST(Trace, SaveLoadRoundTrip) {
  const auto p = temp_file("rt.jsonl");
  const Trace t = make_trace({make_request(1, 0.0, 33, 5, Category::kCode),
                              make_request(2, 0.5, 1, 9, Category::kThinking)});
  save_trace(t, p);
  const Trace u = load_trace(p);
  EXPECT_EQ(t.requests, u.requests);
  fs::remove(p);
}

TEST(Trace, RescaleExamples) {
  // arrival 10 s, raw 2 -> target 4 gives 5 s.
  Trace t;
  t.requests = {make_request(1, 0.0, 16), make_request(2, 10.0, 16)};
  t.raw_qps = 2.0;
  EXPECT_DOUBLE_EQ(rescale_qps(t, 4.0).requests[1].arrival, 5.0);
  const Trace same = rescale_qps(t, 2.0);
  EXPECT_EQ(same.requests, t.requests);
  t.raw_qps = 1.0;
  const Trace slow = rescale_qps(t, 0.5);
  EXPECT_DOUBLE_EQ(slow.requests[1].arrival, 20.0);
  EXPECT_DOUBLE_EQ(slow.raw_qps, 0.5);
  EXPECT_THROW(rescale_qps(t, 0.0), std::invalid_argument);
  EXPECT_THROW(rescale_qps(t, -1.0), std::invalid_argument);
}

TEST(TraceProperty, RescaleIsExactAndPreservesBlocks) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> q(0.01, 100.0);
  TraceSpec spec = trace_preset("traceA");
  spec.num_requests = 200;
  const Trace t = synthesize_trace(spec);
  for (int i = 0; i < 50; ++i) {
    const double target = q(rng);
    const Trace u = rescale_qps(t, target);
    ASSERT_EQ(u.requests.size(), t.requests.size());
    EXPECT_DOUBLE_EQ(u.raw_qps, target);
    for (size_t k = 0; k < t.requests.size(); ++k) {
      const double lhs = u.requests[k].arrival * target;
      const double rhs = t.requests[k].arrival * t.raw_qps;
      EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, std::abs(rhs)));
      EXPECT_EQ(u.requests[k].block_ids, t.requests[k].block_ids);
      EXPECT_EQ(u.requests[k].id, t.requests[k].id);
    }
  }
}

TEST(Trace, SynthesisIsDeterministic) {
  TraceSpec spec = trace_preset("traceB");
  spec.num_requests = 500;
  const Trace a = synthesize_trace(spec);
  const Trace b = synthesize_trace(spec);
  EXPECT_EQ(a.requests, b.requests);
  spec.seed = 2;
  EXPECT_NE(synthesize_trace(spec).requests, a.requests);
}

TEST(Trace, SynthesisInvariants) {
  for (const auto& name : trace_preset_names()) {
    TraceSpec spec = trace_preset(name);
    spec.num_requests = 300;
    const Trace t = synthesize_trace(spec);
    ASSERT_EQ(t.requests.size(), 300u);
    EXPECT_GT(t.raw_qps, 0.0);
    for (size_t i = 0; i < t.requests.size(); ++i) {
      const Request& r = t.requests[i];
      EXPECT_EQ(r.block_ids.size(), blocks_for_tokens(r.prompt_len));
      EXPECT_GE(r.gen_len, 1u);
      EXPECT_GE(r.turn, 1u);
      if (i) {
        EXPECT_LE(t.requests[i - 1].arrival, r.arrival);
      }
    }
  }
}

TEST(Trace, TraceBMeansWithinFivePercent) {
  TraceSpec spec = trace_preset("traceB");
  EXPECT_EQ(spec.num_requests, 15000u);
  const TraceStats s = trace_stats(synthesize_trace(spec));
  EXPECT_NEAR(s.mean_prompt, 832.0, 0.05 * 832.0);
  EXPECT_NEAR(s.mean_gen, 78.0, 0.05 * 78.0);
}

TEST(Trace, PresetMeansWithinFivePercent) {
  const std::map<std::string, std::pair<double, double>> table = {
      {"traceA", {2043, 394}}, {"coder", {5538, 852}}, {"thinking", {3299, 3886}}};
  for (const auto& [name, pg] : table) {
    TraceSpec spec = trace_preset(name);
    const TraceStats s = trace_stats(synthesize_trace(spec));
    EXPECT_NEAR(s.mean_prompt, pg.first, 0.05 * pg.first) << name;
    EXPECT_NEAR(s.mean_gen, pg.second, 0.05 * pg.second) << name;
  }
}

TEST(Trace, SpecValidation) {
  TraceSpec spec = trace_preset("traceB");
  spec.num_requests = 0;
  EXPECT_THROW(synthesize_trace(spec), std::invalid_argument);
  spec = trace_preset("traceB");
  spec.categories[0].fraction += 0.1;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec = trace_preset("traceB");
  spec.categories[0].prompt.mean = 0.0;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  EXPECT_THROW(trace_preset("nope"), std::invalid_argument);
}

TEST(Trace, StatsSingleRequestHasNoReuse) {
  const Trace t = make_trace({make_request(1, 0.0, 64)});
  const TraceStats s = trace_stats(t);
  EXPECT_EQ(s.reuse_events, 0u);
  EXPECT_DOUBLE_EQ(s.reused_block_fraction, 0.0);
}

TEST(Trace, StatsIdenticalRequestsReuseEveryBlockOnce) {
  Request a = make_request(1, 0.0, 64);
  Request b = a;
  b.id = 2;
  b.arrival = 3.0;
  const TraceStats s = trace_stats(make_trace({a, b}));
  EXPECT_EQ(s.distinct_blocks, 4u);
  EXPECT_EQ(s.reuse_events, 4u);
  EXPECT_DOUBLE_EQ(s.reused_block_fraction, 1.0);
  ASSERT_EQ(s.inter_reuse[index_of(Category::kApi)].size(), 4u);
  for (double dt : s.inter_reuse[index_of(Category::kApi)]) EXPECT_DOUBLE_EQ(dt, 3.0);
  EXPECT_THROW(trace_stats(Trace{}), std::invalid_argument);
}

TEST(Trace, ReuseShareMatchesIndependentCounter) {
  TraceSpec spec = trace_preset("traceB");
  spec.num_requests = 2000;
  const Trace t = synthesize_trace(spec);
  for (double f : {0.01, 0.1, 0.5, 1.0})
    EXPECT_NEAR(reuse_share_at(t, f), oracle_top_share(t, f), 1e-12);
  const TraceStats s = trace_stats(t);
  EXPECT_NEAR(s.top10_reuse_share, oracle_top_share(t, 0.10), 1e-12);
}

TEST(Trace, DefaultTraceBSkewNearTarget) {
  TraceSpec spec = trace_preset("traceB");
  spec.num_requests = 2000;
  EXPECT_NEAR(oracle_top_share(synthesize_trace(spec), 0.10), 0.77, 0.05);
}

TEST(Trace, TunedZipfHitsTargetByCounting) {
  TraceSpec spec = trace_preset("traceB");
  spec.num_requests = 1000;
  const double s = tune_zipf_exponent(spec, 0.77, 0.01);
  spec.zipf_exponent = s;
  EXPECT_NEAR(oracle_top_share(synthesize_trace(spec), 0.10), 0.77, 0.01);
}

TEST(Trace, StatsJsonHasCoreFields) {
  TraceSpec spec = trace_preset("coder");
  spec.num_requests = 50;
  const std::string j = trace_stats_to_json(trace_stats(synthesize_trace(spec)));
  for (const char* key : {"requests", "mean_prompt", "mean_gen", "top10_reuse_share"})
    EXPECT_NE(j.find(key), std::string::npos) << key;
}

}  // namespace
}  // namespace stacksim
