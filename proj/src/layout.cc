// Copyright 2026 The StackSim Authors
// SPDX-License-Identifier: Apache-2.0

#include "stacksim/layout.h"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace stacksim {

std::string_view to_string(LayoutMode m) {
  switch (m) {
    case LayoutMode::kTmDh: return "TM_DH";
    case LayoutMode::kTmTm: return "TM_TM";
    case LayoutMode::kDhDh: return "DH_DH";
  }
  return "?";
}

LayoutMode parse_layout_mode(std::string_view s) {
  for (LayoutMode m : kAllLayoutModes)
    if (s == to_string(m)) return m;
  throw std::invalid_argument("unknown layout mode '" + std::string(s) + "'");
}

void LayoutParams::validate() const {
  if (!(L > 0 && d > 0 && B >= 1 && gamma > 0))
    throw std::invalid_argument("layout params must be positive");
  if (!(hysteresis >= 1)) throw std::invalid_argument("hysteresis must be >= 1");
}

CommVolumes comm_volumes(LayoutMode mode, const LayoutParams& p) {
  const double L = p.L, d = p.d, B = p.B;
  switch (mode) {
    case LayoutMode::kTmDh: return {d + L / B + L + d / B, L + d};
    case LayoutMode::kTmTm: return {2 * d + 2 * L / B, L + B * d};
    case LayoutMode::kDhDh: return {2 * L + 2 * d / B, B * L + d};
  }
  throw std::invalid_argument("unknown layout mode");
}

double comm_cost(LayoutMode mode, const LayoutParams& p) {
  const CommVolumes v = comm_volumes(mode, p);
  return v.t_bank + p.gamma * v.t_agg;
}

LayoutMode select_layout(const LayoutParams& p) {
  const double k = 1.0 + p.gamma * p.B;
  if (p.L > p.hysteresis * p.d * k) return LayoutMode::kTmTm;
  if (p.L < p.d / (p.hysteresis * k)) return LayoutMode::kDhDh;
  return LayoutMode::kTmDh;
}

std::unordered_map<uint64_t, Placement> greedy_placement(const std::vector<PlacementObject>& objects,
                                                         double c_comp) {
  std::unordered_map<uint64_t, Placement> out;
  std::vector<const PlacementObject*> eligible;
  for (const auto& o : objects) {
    out[o.id] = Placement::kCapacity;
    if (o.beta) eligible.push_back(&o);
  }
  std::sort(eligible.begin(), eligible.end(), [](const PlacementObject* a, const PlacementObject* b) {
    if (a->alpha != b->alpha) return a->alpha > b->alpha;
    if (a->size != b->size) return a->size < b->size;
    return a->id < b->id;
  });
  double used = 0.0;
  for (const PlacementObject* o : eligible) {
    if (used + o->size <= c_comp) {
      used += o->size;
      out[o->id] = Placement::kCompute;
    }
  }
  return out;
}

}  // namespace stacksim
