// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

// Independent reference computations used by the tests. Nothing here calls
// into the library under test.

#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace oracle {

/// [lo, hi] containing a Binomial(n, p) count with 3-sigma confidence.
inline std::pair<double, double> binomial_3sigma(double n, double p) {
  const double mean = n * p;
  const double sd = std::sqrt(n * p * (1.0 - p));
  return {mean - 3.0 * sd, mean + 3.0 * sd};
}

inline double h2(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

/// QBER of the COW data line from first principles: a data slot has one lit
/// half (clicks with prob 1-exp(-mu t eta)), the empty half clicks with the
/// optical error times that, and each half sees darks D * gate.
inline double cow_qber(double mu, double t, double eta, double dark_hz, double gate_s,
                       double e_opt) {
  const double ps = 1.0 - std::exp(-mu * t * eta);
  const double pd = dark_hz * gate_s;
  return (e_opt * ps + pd) / (ps * (1.0 + e_opt) + 2.0 * pd);
}

/// out[i] = XOR_j T[i][j] in[j] with T[i][j] = seed[i - j + n - 1].
inline std::vector<int> toeplitz_naive(const std::vector<int>& seed, const std::vector<int>& in,
                                       std::size_t out_len) {
  const std::size_t n = in.size();
  std::vector<int> out(out_len, 0);
  for (std::size_t i = 0; i < out_len; ++i) {
    int acc = 0;
    for (std::size_t j = 0; j < n; ++j) {
      acc ^= seed[i + n - 1 - j] & in[j];
    }
    out[i] = acc;
  }
  return out;
}

/// Multiplication in GF(2)[x] / (x^64 + x^4 + x^3 + x + 1) via a 128-bit
/// carry-less product and explicit reduction.
inline unsigned long long gf64_mul_ref(unsigned long long a, unsigned long long b) {
  unsigned long long lo = 0, hi = 0;
  for (int i = 0; i < 64; ++i) {
    if ((b >> i) & 1ULL) {
      lo ^= a << i;
      if (i) hi ^= a >> (64 - i);
    }
  }
  // x^64 = x^4 + x^3 + x + 1; fold hi twice.
  for (int round = 0; round < 2; ++round) {
    const unsigned long long h = hi;
    hi = 0;
    for (int k : {0, 1, 3, 4}) {
      lo ^= h << k;
      if (k) hi ^= h >> (64 - k);
    }
  }
  return lo;
}

}  // namespace oracle
