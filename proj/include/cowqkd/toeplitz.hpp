// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "cowqkd/bit_vector.hpp"

namespace cowqkd {

/// Seed of an out_len x in_len Toeplitz matrix over GF(2):
///   T[i][j] = bits[i - j + in_len - 1]
/// so bits[in_len - 1] is the main diagonal, the first in_len bits run up the
/// first row (right to left) and the rest run down the first column.
class ToeplitzSeed {
 public:
  /// Throws ParameterError unless bits.size() == in_len + out_len - 1.
  ToeplitzSeed(BitVector bits, std::size_t in_len, std::size_t out_len);

  const BitVector& bits() const noexcept { return bits_; }
  std::size_t in_len() const noexcept { return in_len_; }
  std::size_t out_len() const noexcept { return out_len_; }

  static std::size_t seed_length(std::size_t in_len, std::size_t out_len) noexcept {
    return in_len + out_len == 0 ? 0 : in_len + out_len - 1;
  }

 private:
  BitVector bits_;
  std::size_t in_len_;
  std::size_t out_len_;
};

/// T * input. Word-parallel: output bit i is the parity of
/// seed[i .. i + n) AND reverse(input).
BitVector toeplitz_hash(const ToeplitzSeed& seed, const BitVector& input);

/// Same with the seed length checked against |input| + out_len - 1.
BitVector toeplitz_hash(const BitVector& seed, const BitVector& input, std::size_t out_len);

}  // namespace cowqkd
