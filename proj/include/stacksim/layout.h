// Copyright 2026 The StackSim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace stacksim {

// Token-major keys spread tokens over banks; dimension-major values spread
// head dimensions over banks.
inline uint32_t key_bank(uint64_t n, uint32_t B) { return static_cast<uint32_t>(n % B); }
inline uint32_t value_bank(uint64_t j, uint32_t B) { return static_cast<uint32_t>(j % B); }

enum class LayoutMode : uint8_t { kTmDh, kTmTm, kDhDh };
inline constexpr LayoutMode kAllLayoutModes[] = {LayoutMode::kTmDh, LayoutMode::kTmTm,
                                                 LayoutMode::kDhDh};

std::string_view to_string(LayoutMode m);
LayoutMode parse_layout_mode(std::string_view s);

struct LayoutParams {
  double L = 1.0;  // context tokens
  double d = 128.0;
  double B = 256.0;
  double gamma = 1.0 / 256.0;
  double hysteresis = 2.0;

  void validate() const;
};

struct CommVolumes {
  double t_bank = 0.0;  // elements moved per bank
  double t_agg = 0.0;   // elements reduced at the base die
};

// Per head, per decode step.
CommVolumes comm_volumes(LayoutMode mode, const LayoutParams& p);
// t_bank + gamma * t_agg.
double comm_cost(LayoutMode mode, const LayoutParams& p);
LayoutMode select_layout(const LayoutParams& p);

struct PlacementObject {
  uint64_t id = 0;
  double size = 1.0;
  double alpha = 0.0;  // normalized access frequency
  bool beta = false;   // PIM affinity
};

enum class Placement : uint8_t { kCompute, kCapacity };

// Highest-alpha PIM-affine objects take compute capacity first.
std::unordered_map<uint64_t, Placement> greedy_placement(const std::vector<PlacementObject>& objects,
                                                         double c_comp);

}  // namespace stacksim
