// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>

#include "cowqkd/photonic_model.hpp"

namespace cowqkd {

/// h(p) = -p log2 p - (1-p) log2(1-p), with h(0) = h(1) = 0.
double binary_entropy(double p);

/// Default Eve-information bound: h((1 + V) / 2). Equals 0 at V = 1 and 1 at
/// V = 0, non-increasing in between.
double eve_info_bound(double visibility);

/// Alternative form 1 - V. Lies below h((1+V)/2) on (0, 1), so it is the
/// less conservative of the two.
double eve_info_bound_linear(double visibility);

/// Looks up a bound by name ("entropy" or "linear").
EveBound eve_bound_by_name(std::string_view name);

/// m = max(0, floor(n (1 - I_E(V)) - leaked - 2 log2(1/eps))).
std::size_t compute_secret_length(std::size_t n, std::size_t leaked_bits, double visibility,
                                  double epsilon_pa, const EveBound& bound = {});

/// Per-block accounting.
struct DistillationRecord {
  std::size_t n_sifted = 0;
  double qber = 0.0;
  std::size_t leaked_bits = 0;   // reconciliation parities disclosed
  std::size_t confirm_bits = 0;  // key-confirmation hash, counted as leakage too
  double visibility = 0.0;       // value fed to the Eve bound
  double eve_bound_per_bit = 0.0;
  std::size_t secret_len = 0;
  double epsilon_pa = 0.0;
};

}  // namespace cowqkd
