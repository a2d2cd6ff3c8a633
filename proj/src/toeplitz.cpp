// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "cowqkd/toeplitz.hpp"

#include <bit>
#include <string>

#include "cowqkd/errors.hpp"

namespace cowqkd {

ToeplitzSeed::ToeplitzSeed(BitVector bits, std::size_t in_len, std::size_t out_len)
    : bits_(std::move(bits)), in_len_(in_len), out_len_(out_len) {
  if (bits_.size() != seed_length(in_len, out_len)) {
    throw ParameterError("Toeplitz seed has " + std::to_string(bits_.size()) +
                         " bits, expected " + std::to_string(seed_length(in_len, out_len)));
  }
}

BitVector toeplitz_hash(const ToeplitzSeed& seed, const BitVector& input) {
  const std::size_t n = seed.in_len();
  if (input.size() != n) {
    throw ParameterError("toeplitz_hash: input length does not match seed");
  }
  const std::size_t m = seed.out_len();
  BitVector out(m);
  if (m == 0 || n == 0) {
    return out;
  }

  BitVector reversed(n);
  for (std::size_t j = 0; j < n; ++j) {
    reversed.set(j, input.get(n - 1 - j));
  }
  const auto rw = reversed.words();
  const BitVector& s = seed.bits();
  for (std::size_t i = 0; i < m; ++i) {
    std::uint64_t acc = 0;
    for (std::size_t w = 0; w < rw.size(); ++w) {
      acc ^= s.read_word(i + 64 * w) & rw[w];
    }
    out.set(i, std::popcount(acc) & 1);
  }
  return out;
}

BitVector toeplitz_hash(const BitVector& seed, const BitVector& input, std::size_t out_len) {
  return toeplitz_hash(ToeplitzSeed(seed, input.size(), out_len), input);
}

}  // namespace cowqkd
