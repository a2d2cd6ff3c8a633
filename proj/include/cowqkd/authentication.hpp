// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cowqkd/bit_vector.hpp"

namespace cowqkd {

/// Multiplication in GF(2^64) modulo x^64 + x^4 + x^3 + x + 1.
std::uint64_t gf64_mul(std::uint64_t a, std::uint64_t b) noexcept;

/// Polynomial-evaluation hash over GF(2^64). The message is split into
/// big-endian 64-bit words (last one zero-padded) followed by a word holding
/// the bit length; h = sum_i w_i k^(L-i+1). Two distinct messages of at most
/// L words collide for at most (L+1)/2^64 of the keys.
std::uint64_t poly_hash64(std::uint64_t key, std::span<const std::uint8_t> message) noexcept;

/// A withdrawal from an AuthKeyPool, for audit.
struct KeyLedgerEntry {
  std::size_t offset;  // bit offset in the pool's lifetime stream
  std::size_t length;
  std::string purpose;
};

/// Shared secret bits for authentication. Bits are only ever appended and
/// consumed front to back, so no bit can be used twice.
class AuthKeyPool {
 public:
  AuthKeyPool() = default;
  explicit AuthKeyPool(BitVector initial) : bits_(std::move(initial)) {}

  std::size_t total() const noexcept { return bits_.size(); }
  std::size_t consumed() const noexcept { return consumed_; }
  std::size_t available() const noexcept { return bits_.size() - consumed_; }

  void replenish(const BitVector& bits) { bits_.append(bits); }
  /// Takes the next n unused bits. Throws KeyDepletionError if short.
  BitVector withdraw(std::size_t n, std::string purpose = {});
  std::uint64_t withdraw_word(std::size_t nbits, std::string purpose = {});

  /// Every bit the pool ever held (consumed ones included); audit only.
  const BitVector& history() const noexcept { return bits_; }
  const std::vector<KeyLedgerEntry>& ledger() const noexcept { return ledger_; }

 private:
  BitVector bits_;
  std::size_t consumed_ = 0;
  std::vector<KeyLedgerEntry> ledger_;
};

/// Key material consumed by one tag: a fresh hash key and a one-time pad.
inline constexpr std::size_t wc_key_bits(std::size_t tag_len) { return 64 + tag_len; }

/// tag = truncate(poly_hash64(k, message), tag_len) XOR pad. Consumes
/// wc_key_bits(tag_len) bits. tag_len in [1, 64].
std::uint64_t wc_tag(AuthKeyPool& pool, std::span<const std::uint8_t> message,
                     std::size_t tag_len = 64);

/// Recomputes the tag from the receiver's pool (same consumption as wc_tag)
/// and compares.
bool wc_verify(AuthKeyPool& pool, std::span<const std::uint8_t> message, std::uint64_t tag,
               std::size_t tag_len = 64);

/// Tag from explicit key material (hash key, pad); used for replay audits.
std::uint64_t wc_tag_with(std::uint64_t hash_key, std::uint64_t pad,
                          std::span<const std::uint8_t> message, std::size_t tag_len = 64) noexcept;

}  // namespace cowqkd
