// Copyright 2026 The StackSim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stacksim {

// Every KV accounting unit downstream is a 16-token block.
inline constexpr uint32_t kBlockTokens = 16;

constexpr uint32_t blocks_for_tokens(uint64_t tokens) {
  return static_cast<uint32_t>((tokens + kBlockTokens - 1) / kBlockTokens);
}

enum class Category : uint8_t { kApi = 0, kText = 1, kCode = 2, kThinking = 3 };
inline constexpr size_t kNumCategories = 4;
inline constexpr std::array<Category, kNumCategories> kAllCategories = {
    Category::kApi, Category::kText, Category::kCode, Category::kThinking};

std::string_view to_string(Category c);
// Accepts "api", "text", "code", "thinking". Throws std::invalid_argument.
Category parse_category(std::string_view s);

inline constexpr size_t index_of(Category c) { return static_cast<size_t>(c); }

struct Request {
  uint64_t id = 0;
  double arrival = 0.0;  // seconds
  Category category = Category::kApi;
  uint32_t prompt_len = 0;
  uint32_t gen_len = 1;
  uint32_t turn = 1;
  // One hash per 16-token prompt chunk.
  std::vector<uint64_t> block_ids;

  bool operator==(const Request&) const = default;
};

// Immutable once built; safe to share read-only across runs.
struct Trace {
  std::vector<Request> requests;  // sorted by arrival
  double raw_qps = 0.0;
  // Number of out-of-order arrivals repaired while loading.
  size_t reordered = 0;
};

class TraceParseError : public std::runtime_error {
 public:
  TraceParseError(size_t line, const std::string& what);
  size_t line() const { return line_; }

 private:
  size_t line_;
};

// Sorts by arrival (stable) and derives raw_qps = count / span. A zero span
// is treated as a one-second window.
Trace make_trace(std::vector<Request> requests);

Trace load_trace(const std::filesystem::path& path);
void save_trace(const Trace& trace, const std::filesystem::path& path);
std::string request_to_json_line(const Request& r);

// Scales every arrival by raw_qps / target_qps.
Trace rescale_qps(const Trace& trace, double target_qps);

struct LengthDist {
  double mean = 1.0;
  double sigma = 0.5;  // log-space standard deviation
};

struct CategorySpec {
  double fraction = 0.0;
  LengthDist prompt;
  LengthDist gen;
  // Probability that a fresh conversation starts with a shared system prompt.
  double prefix_prob = 0.0;
  // Probability that a request continues a recent conversation instead.
  double next_turn_prob = 0.0;
};

struct TraceSpec {
  std::array<CategorySpec, kNumCategories> categories{};
  size_t num_requests = 1000;
  double qps = 1.0;  // Poisson arrival rate
  size_t prefix_pool_size = 512;
  double prefix_mean_blocks = 16.0;
  double zipf_exponent = 1.0;
  uint64_t seed = 1;

  // Throws std::invalid_argument when the mix or means are malformed.
  void validate() const;
};

Trace synthesize_trace(const TraceSpec& spec);

// Shapes matching the four production trace families (request count, mean
// prompt and generation lengths).
TraceSpec trace_preset(std::string_view name);
std::vector<std::string> trace_preset_names();

struct SkewPoint {
  double block_fraction = 0.0;
  double reuse_fraction = 0.0;
};

struct TraceStats {
  size_t requests = 0;
  double mean_prompt = 0.0;
  double mean_gen = 0.0;
  double p50_prompt = 0.0, p90_prompt = 0.0, p99_prompt = 0.0;
  double p50_gen = 0.0, p90_gen = 0.0, p99_gen = 0.0;
  std::array<size_t, kNumCategories> per_category{};
  std::array<double, kNumCategories> mean_prompt_by_category{};
  std::array<double, kNumCategories> mean_gen_by_category{};
  size_t distinct_blocks = 0;
  size_t reuse_events = 0;
  // Fraction of distinct blocks that occur more than once.
  double reused_block_fraction = 0.0;
  // Share of reuse events captured by the most-reused 10% of blocks.
  double top10_reuse_share = 0.0;
  std::vector<SkewPoint> skew_curve;
  // Seconds between successive uses of the same block, keyed by the
  // category of the reusing request.
  std::array<std::vector<double>, kNumCategories> inter_reuse;
};

TraceStats trace_stats(const Trace& trace);

// Share of reuse events landing on the top `block_fraction` of blocks.
double reuse_share_at(const Trace& trace, double block_fraction);

// Bisects the Zipf exponent until the top-10% reuse share of the generated
// trace is within `tolerance` of `target`. Returns the exponent.
double tune_zipf_exponent(TraceSpec spec, double target, double tolerance = 0.01,
                          int max_iters = 40);

std::string trace_stats_to_json(const TraceStats& stats);

}  // namespace stacksim
