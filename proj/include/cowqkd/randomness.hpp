// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "cowqkd/bit_vector.hpp"

namespace cowqkd {

using Seed = std::array<std::uint8_t, 32>;

/// Parses 1..64 hex digits as a big-endian 256-bit value (left-padded with
/// zeros). Optional "0x" prefix.
Seed seed_from_hex(std::string_view hex);
std::string seed_to_hex(const Seed& seed);

/// Deterministic random bit supply standing in for the QRNG.
///
/// The stream is the ChaCha20 keystream under the 256-bit seed (zero nonce);
/// stream bit k is bit k%8 of keystream byte k/8. `counter()` is the number of
/// bits drawn so far, so the bit delivered next depends only on (seed, counter).
///
/// Consumption per call:
///   next_bits(n)  n bits
///   next_u64      64 bits
///   bernoulli     64 bits, true iff draw < floor(p * 2^64)
///   next_unit     64 bits (top 53 used)
///   next_below    64 bits per attempt (rejection sampling)
///
/// Satisfies UniformRandomBitGenerator so std distributions can use it.
class BitSource {
 public:
  using result_type = std::uint64_t;

  explicit BitSource(const Seed& seed);
  static BitSource from_hex(std::string_view hex) { return BitSource(seed_from_hex(hex)); }

  BitVector next_bits(std::size_t n);
  std::uint64_t next_u64() { return read(64); }
  bool bernoulli(double p);
  /// Uniform double in [0, 1).
  double next_unit();
  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t next_below(std::uint64_t bound);
  /// Number of failures before the first success of a Bernoulli(p) trial
  /// sequence; p in (0, 1]. Consumes 64 bits.
  std::uint64_t geometric(double p);

  /// Child stream keyed by BLAKE2b(key = seed, message = label). Depends on
  /// (seed, label) only; the parent's counter is untouched.
  BitSource fork(std::string_view label) const;

  std::uint64_t counter() const noexcept { return counter_; }
  const Seed& seed() const noexcept { return seed_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

 private:
  std::uint64_t read(unsigned nbits);
  void refill();

  static constexpr std::size_t kBufferBytes = 4096;

  Seed seed_;
  std::uint64_t counter_ = 0;
  std::uint64_t buffer_start_bit_ = 0;
  bool buffer_valid_ = false;
  std::array<std::uint8_t, kBufferBytes + 16> buffer_{};
};

}  // namespace cowqkd
