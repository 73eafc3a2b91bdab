// Copyright 2026 The StackSim Authors
// SPDX-License-Identifier: Apache-2.0

#include "stacksim/trace.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace stacksim {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr uint64_t kPrefixSalt = 0x9e3779b97f4a7c15ULL;
constexpr uint64_t kUniqueSalt = 0xc2b2ae3d27d4eb4fULL;

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t mix(uint64_t a, uint64_t b, uint64_t c, uint64_t d = 0) {
  return splitmix64(splitmix64(splitmix64(a ^ splitmix64(b)) ^ c) ^ d);
}

double nearest_rank(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  auto rank = static_cast<size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
  rank = std::clamp<size_t>(rank, 1, v.size());
  return v[rank - 1];
}

std::vector<uint64_t> reuse_counts_desc(const Trace& trace) {
  std::unordered_map<uint64_t, uint64_t> counts;
  for (const auto& r : trace.requests)
    for (uint64_t b : r.block_ids) ++counts[b];
  std::vector<uint64_t> reuse;
  reuse.reserve(counts.size());
  for (const auto& [id, c] : counts) reuse.push_back(c - 1);
  std::sort(reuse.begin(), reuse.end(), std::greater<>());
  return reuse;
}

double share_of_top(const std::vector<uint64_t>& reuse_desc, uint64_t total,
                    double fraction) {
  if (total == 0 || reuse_desc.empty()) return 0.0;
  auto n = static_cast<size_t>(
      std::ceil(fraction * static_cast<double>(reuse_desc.size()) - 1e-9));
  n = std::min(n, reuse_desc.size());
  uint64_t top = 0;
  for (size_t i = 0; i < n; ++i) top += reuse_desc[i];
  return static_cast<double>(top) / static_cast<double>(total);
}

uint32_t sample_length(std::mt19937_64& rng, const LengthDist& d) {
  const double mu = std::log(d.mean) - 0.5 * d.sigma * d.sigma;
  std::lognormal_distribution<double> dist(mu, d.sigma);
  const double v = std::round(dist(rng));
  return static_cast<uint32_t>(std::max(1.0, std::min(v, 1e7)));
}

}  // namespace

std::string_view to_string(Category c) {
  switch (c) {
    case Category::kApi: return "api";
    case Category::kText: return "text";
    case Category::kCode: return "code";
    case Category::kThinking: return "thinking";
  }
  return "api";
}

Category parse_category(std::string_view s) {
  for (Category c : kAllCategories)
    if (to_string(c) == s) return c;
  throw std::invalid_argument("unknown category '" + std::string(s) + "'");
}

TraceParseError::TraceParseError(size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

Trace make_trace(std::vector<Request> requests) {
  Trace t;
  for (size_t i = 1; i < requests.size(); ++i)
    if (requests[i].arrival < requests[i - 1].arrival) ++t.reordered;
  if (t.reordered > 0) {
    std::stable_sort(requests.begin(), requests.end(),
                     [](const Request& a, const Request& b) { return a.arrival < b.arrival; });
  }
  t.requests = std::move(requests);
  if (!t.requests.empty()) {
    const double span = t.requests.back().arrival - t.requests.front().arrival;
    const double n = static_cast<double>(t.requests.size());
    t.raw_qps = span > 0.0 ? n / span : n;
  }
  return t;
}

std::string request_to_json_line(const Request& r) {
  ordered_json j;
  j["id"] = r.id;
  j["arrival_s"] = r.arrival;
  j["category"] = std::string(to_string(r.category));
  j["prompt_len"] = r.prompt_len;
  j["gen_len"] = r.gen_len;
  j["turn"] = r.turn;
  j["block_ids"] = r.block_ids;
  return j.dump();
}

Trace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file " + path.string());
  std::vector<Request> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Request r;
    try {
      const auto j = nlohmann::json::parse(line);
      r.id = j.at("id").get<uint64_t>();
      r.arrival = j.at("arrival_s").get<double>();
      r.category = parse_category(j.at("category").get<std::string>());
      r.prompt_len = j.at("prompt_len").get<uint32_t>();
      r.gen_len = j.at("gen_len").get<uint32_t>();
      r.turn = j.at("turn").get<uint32_t>();
      r.block_ids = j.at("block_ids").get<std::vector<uint64_t>>();
    } catch (const std::exception& e) {
      throw TraceParseError(lineno, e.what());
    }
    if (r.arrival < 0.0 || !std::isfinite(r.arrival))
      throw TraceParseError(lineno, "arrival_s must be a finite value >= 0");
    if (r.gen_len < 1) throw TraceParseError(lineno, "gen_len must be >= 1");
    if (r.turn < 1) throw TraceParseError(lineno, "turn must be >= 1");
    if (r.block_ids.size() != blocks_for_tokens(r.prompt_len))
      throw TraceParseError(lineno, "block_ids length does not match ceil(prompt_len/16)");
    out.push_back(std::move(r));
  }
  if (out.empty()) throw std::runtime_error("trace file " + path.string() + " is empty");
  return make_trace(std::move(out));
}

void save_trace(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file " + path.string());
  for (const auto& r : trace.requests) out << request_to_json_line(r) << '\n';
}

Trace rescale_qps(const Trace& trace, double target_qps) {
  if (!(target_qps > 0.0)) throw std::invalid_argument("target_qps must be > 0");
  Trace out = trace;
  if (target_qps == trace.raw_qps) return out;
  const double scale = trace.raw_qps / target_qps;
  for (auto& r : out.requests) r.arrival *= scale;
  out.raw_qps = target_qps;
  return out;
}

void TraceSpec::validate() const {
  double sum = 0.0;
  for (const auto& c : categories) {
    if (c.fraction < 0.0) throw std::invalid_argument("category fraction must be >= 0");
    sum += c.fraction;
    if (c.fraction > 0.0 && (!(c.prompt.mean > 0.0) || !(c.gen.mean > 0.0)))
      throw std::invalid_argument("length means must be > 0");
    if (c.prompt.sigma < 0.0 || c.gen.sigma < 0.0)
      throw std::invalid_argument("length sigma must be >= 0");
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("category fractions must sum to 1");
  if (num_requests == 0) throw std::invalid_argument("request count must be > 0");
  if (!(qps > 0.0)) throw std::invalid_argument("qps must be > 0");
  if (prefix_pool_size == 0) throw std::invalid_argument("prefix pool must be non-empty");
  if (!(prefix_mean_blocks >= 1.0)) throw std::invalid_argument("prefix_mean_blocks must be >= 1");
  if (zipf_exponent < 0.0) throw std::invalid_argument("zipf exponent must be >= 0");
}

Trace synthesize_trace(const TraceSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::exponential_distribution<double> gap(spec.qps);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<double> mix_weights;
  for (const auto& c : spec.categories) mix_weights.push_back(c.fraction);
  std::discrete_distribution<size_t> pick_category(mix_weights.begin(), mix_weights.end());

  std::vector<double> zipf_weights(spec.prefix_pool_size);
  for (size_t k = 0; k < zipf_weights.size(); ++k)
    zipf_weights[k] = 1.0 / std::pow(static_cast<double>(k + 1), spec.zipf_exponent);
  std::discrete_distribution<size_t> pick_prefix(zipf_weights.begin(), zipf_weights.end());

  // Prefix k has a fixed length in [1, 2*mean - 1].
  const auto span = static_cast<uint64_t>(std::max(1.0, 2.0 * spec.prefix_mean_blocks - 1.0));
  auto prefix_len = [&](uint64_t cat, uint64_t k) {
    return 1 + mix(spec.seed ^ kPrefixSalt, cat, k, 0xffff) % span;
  };

  struct Conversation {
    std::vector<uint64_t> blocks;
    uint32_t turn;
  };
  constexpr size_t kRecent = 64;
  std::array<std::deque<Conversation>, kNumCategories> recent;

  std::vector<Request> out;
  out.reserve(spec.num_requests);
  double t = 0.0;
  for (size_t i = 0; i < spec.num_requests; ++i) {
    if (i > 0) t += gap(rng);
    const size_t ci = pick_category(rng);
    const auto& cs = spec.categories[ci];
    Request r;
    r.id = i;
    r.arrival = t;
    r.category = kAllCategories[ci];
    r.prompt_len = sample_length(rng, cs.prompt);
    r.gen_len = sample_length(rng, cs.gen);
    const uint32_t n_blocks = blocks_for_tokens(r.prompt_len);

    std::vector<uint64_t> prefix;
    const double u_turn = unit(rng);
    const double u_prefix = unit(rng);
    auto& conv = recent[ci];
    size_t conv_slot = conv.size();
    if (u_turn < cs.next_turn_prob && !conv.empty()) {
      conv_slot = std::uniform_int_distribution<size_t>(0, conv.size() - 1)(rng);
      prefix = conv[conv_slot].blocks;
      r.turn = conv[conv_slot].turn + 1;
    } else if (u_prefix < cs.prefix_prob) {
      const uint64_t k = pick_prefix(rng);
      const uint64_t len = prefix_len(ci, k);
      for (uint64_t j = 0; j < len; ++j)
        prefix.push_back(mix(spec.seed ^ kPrefixSalt, ci, k, j));
    }
    r.block_ids.reserve(n_blocks);
    for (uint32_t j = 0; j < n_blocks; ++j) {
      r.block_ids.push_back(j < prefix.size() ? prefix[j]
                                              : mix(spec.seed ^ kUniqueSalt, i, j, ci));
    }
    if (conv_slot < conv.size()) {
      conv[conv_slot] = Conversation{r.block_ids, r.turn};
    } else {
      conv.push_back(Conversation{r.block_ids, r.turn});
      if (conv.size() > kRecent) conv.pop_front();
    }
    out.push_back(std::move(r));
  }
  return make_trace(std::move(out));
}

namespace {

TraceSpec base_spec(size_t n, double prompt, double gen) {
  TraceSpec s;
  s.num_requests = n;
  for (auto& c : s.categories) {
    c.prompt = {prompt, 0.7};
    c.gen = {gen, 0.8};
  }
  return s;
}

}  // namespace

TraceSpec trace_preset(std::string_view name) {
  if (name == "traceB") {
    TraceSpec s = base_spec(15000, 832, 78);
    s.qps = 10.0;
    s.categories[0].fraction = 0.6;
    s.categories[1].fraction = 0.4;
    s.categories[0].prefix_prob = 0.9;
    s.categories[1].prefix_prob = 0.6;
    s.categories[0].next_turn_prob = 0.2;
    s.categories[1].next_turn_prob = 0.3;
    s.prefix_pool_size = 2048;
    s.prefix_mean_blocks = 24;
    // Top 10% of blocks carry ~77% of reuse at 2000 requests.
    s.zipf_exponent = 0.875;
    return s;
  }
  if (name == "traceA") {
    TraceSpec s = base_spec(8000, 2043, 394);
    s.qps = 4.0;
    const double mix[] = {0.3, 0.3, 0.2, 0.2};
    const double pre[] = {0.9, 0.6, 0.7, 0.05};
    const double turn[] = {0.2, 0.3, 0.4, 0.02};
    for (size_t i = 0; i < kNumCategories; ++i) {
      s.categories[i].fraction = mix[i];
      s.categories[i].prefix_prob = pre[i];
      s.categories[i].next_turn_prob = turn[i];
    }
    s.prefix_pool_size = 1024;
    s.prefix_mean_blocks = 32;
    s.zipf_exponent = 1.0;
    return s;
  }
  if (name == "coder") {
    TraceSpec s = base_spec(2500, 5538, 852);
    s.qps = 1.0;
    s.categories[2].fraction = 1.0;
    s.categories[2].prefix_prob = 0.7;
    s.categories[2].next_turn_prob = 0.4;
    s.prefix_pool_size = 512;
    s.prefix_mean_blocks = 64;
    s.zipf_exponent = 1.0;
    return s;
  }
  if (name == "thinking") {
    TraceSpec s = base_spec(1000, 3299, 3886);
    s.qps = 0.5;
    s.categories[3].fraction = 1.0;
    s.categories[3].gen.sigma = 0.5;
    s.categories[3].prefix_prob = 0.05;
    s.categories[3].next_turn_prob = 0.02;
    s.prefix_pool_size = 256;
    s.prefix_mean_blocks = 8;
    s.zipf_exponent = 1.0;
    return s;
  }
  throw std::invalid_argument("unknown trace preset '" + std::string(name) + "'");
}

std::vector<std::string> trace_preset_names() { return {"traceB", "traceA", "coder", "thinking"}; }

TraceStats trace_stats(const Trace& trace) {
  if (trace.requests.empty()) throw std::invalid_argument("trace_stats on empty trace");
  TraceStats s;
  s.requests = trace.requests.size();
  std::vector<double> prompts, gens;
  std::array<double, kNumCategories> psum{}, gsum{};
  std::unordered_map<uint64_t, double> last_seen;
  for (const auto& r : trace.requests) {
    prompts.push_back(r.prompt_len);
    gens.push_back(r.gen_len);
    const size_t ci = index_of(r.category);
    ++s.per_category[ci];
    psum[ci] += r.prompt_len;
    gsum[ci] += r.gen_len;
    for (uint64_t b : r.block_ids) {
      auto [it, fresh] = last_seen.try_emplace(b, r.arrival);
      if (!fresh) {
        s.inter_reuse[ci].push_back(r.arrival - it->second);
        it->second = r.arrival;
      }
    }
  }
  const double n = static_cast<double>(s.requests);
  for (size_t i = 0; i < s.requests; ++i) {
    s.mean_prompt += prompts[i] / n;
    s.mean_gen += gens[i] / n;
  }
  for (size_t ci = 0; ci < kNumCategories; ++ci) {
    if (s.per_category[ci] == 0) continue;
    s.mean_prompt_by_category[ci] = psum[ci] / static_cast<double>(s.per_category[ci]);
    s.mean_gen_by_category[ci] = gsum[ci] / static_cast<double>(s.per_category[ci]);
  }
  s.p50_prompt = nearest_rank(prompts, 50);
  s.p90_prompt = nearest_rank(prompts, 90);
  s.p99_prompt = nearest_rank(prompts, 99);
  s.p50_gen = nearest_rank(gens, 50);
  s.p90_gen = nearest_rank(gens, 90);
  s.p99_gen = nearest_rank(gens, 99);

  const auto reuse = reuse_counts_desc(trace);
  s.distinct_blocks = reuse.size();
  size_t reused = 0;
  for (uint64_t c : reuse) {
    s.reuse_events += c;
    if (c > 0) ++reused;
  }
  s.reused_block_fraction =
      reuse.empty() ? 0.0 : static_cast<double>(reused) / static_cast<double>(reuse.size());
  s.top10_reuse_share = share_of_top(reuse, s.reuse_events, 0.10);
  for (double f : {0.01, 0.02, 0.05, 0.10, 0.20, 0.30, 0.50, 0.75, 1.0})
    s.skew_curve.push_back({f, share_of_top(reuse, s.reuse_events, f)});
  return s;
}

double reuse_share_at(const Trace& trace, double block_fraction) {
  const auto reuse = reuse_counts_desc(trace);
  uint64_t total = 0;
  for (uint64_t c : reuse) total += c;
  return share_of_top(reuse, total, block_fraction);
}

double tune_zipf_exponent(TraceSpec spec, double target, double tolerance, int max_iters) {
  auto share = [&](double s) {
    spec.zipf_exponent = s;
    return reuse_share_at(synthesize_trace(spec), 0.10);
  };
  double lo = 0.0, hi = 4.0;
  const double f_lo = share(lo), f_hi = share(hi);
  if (f_lo >= target) return lo;
  if (f_hi <= target) return hi;
  double mid = 0.5 * (lo + hi);
  for (int i = 0; i < max_iters; ++i) {
    mid = 0.5 * (lo + hi);
    const double f = share(mid);
    if (std::abs(f - target) <= tolerance) break;
    (f < target ? lo : hi) = mid;
  }
  return mid;
}

std::string trace_stats_to_json(const TraceStats& s) {
  ordered_json j;
  j["requests"] = s.requests;
  j["mean_prompt"] = s.mean_prompt;
  j["mean_gen"] = s.mean_gen;
  j["prompt_percentiles"] = {{"p50", s.p50_prompt}, {"p90", s.p90_prompt}, {"p99", s.p99_prompt}};
  j["gen_percentiles"] = {{"p50", s.p50_gen}, {"p90", s.p90_gen}, {"p99", s.p99_gen}};
  ordered_json cats;
  for (Category c : kAllCategories) {
    const size_t i = index_of(c);
    cats[std::string(to_string(c))] = {{"count", s.per_category[i]},
                                       {"mean_prompt", s.mean_prompt_by_category[i]},
                                       {"mean_gen", s.mean_gen_by_category[i]},
                                       {"inter_reuse_samples", s.inter_reuse[i].size()}};
  }
  j["categories"] = cats;
  j["distinct_blocks"] = s.distinct_blocks;
  j["reuse_events"] = s.reuse_events;
  j["reused_block_fraction"] = s.reused_block_fraction;
  j["top10_reuse_share"] = s.top10_reuse_share;
  ordered_json curve = ordered_json::array();
  for (const auto& p : s.skew_curve) curve.push_back({p.block_fraction, p.reuse_fraction});
  j["skew_curve"] = curve;
  return j.dump(2);
}

}  // namespace stacksim
