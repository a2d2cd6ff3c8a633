// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "cowqkd/authentication.hpp"

#include "cowqkd/errors.hpp"

namespace cowqkd {

std::uint64_t gf64_mul(std::uint64_t a, std::uint64_t b) noexcept {
  // Shift-and-add with reduction folded into every shift.
  constexpr std::uint64_t kReduce = 0x1B;  // x^4 + x^3 + x + 1
  std::uint64_t r = 0;
  while (b != 0) {
    if (b & 1) {
      r ^= a;
    }
    b >>= 1;
    const bool carry = a >> 63;
    a <<= 1;
    if (carry) {
      a ^= kReduce;
    }
  }
  return r;
}

std::uint64_t poly_hash64(std::uint64_t key, std::span<const std::uint8_t> message) noexcept {
  std::uint64_t h = 0;
  std::size_t i = 0;
  while (i < message.size()) {
    std::uint64_t w = 0;
    for (std::size_t b = 0; b < 8; ++b) {
      w <<= 8;
      if (i + b < message.size()) {
        w |= message[i + b];
      }
    }
    h = gf64_mul(h ^ w, key);
    i += 8;
  }
  h = gf64_mul(h ^ (static_cast<std::uint64_t>(message.size()) * 8), key);
  return h;
}

BitVector AuthKeyPool::withdraw(std::size_t n, std::string purpose) {
  if (n > available()) {
    throw KeyDepletionError("authentication pool has " + std::to_string(available()) +
                            " bits, " + std::to_string(n) + " requested");
  }
  BitVector out = bits_.slice(consumed_, n);
  ledger_.push_back({consumed_, n, std::move(purpose)});
  consumed_ += n;
  return out;
}

std::uint64_t AuthKeyPool::withdraw_word(std::size_t nbits, std::string purpose) {
  if (nbits > 64) {
    throw ParameterError("withdraw_word: at most 64 bits");
  }
  return withdraw(nbits, std::move(purpose)).read_word(0);
}

namespace {

std::uint64_t truncate(std::uint64_t v, std::size_t bits) {
  return bits >= 64 ? v : v & ((std::uint64_t{1} << bits) - 1);
}

void check_tag_len(std::size_t tag_len) {
  if (tag_len == 0 || tag_len > 64) {
    throw ParameterError("tag length must be in [1, 64]");
  }
}

}  // namespace

std::uint64_t wc_tag_with(std::uint64_t hash_key, std::uint64_t pad,
                          std::span<const std::uint8_t> message, std::size_t tag_len) noexcept {
  return truncate(poly_hash64(hash_key, message) ^ pad, tag_len);
}

std::uint64_t wc_tag(AuthKeyPool& pool, std::span<const std::uint8_t> message, std::size_t tag_len) {
  check_tag_len(tag_len);
  if (pool.available() < wc_key_bits(tag_len)) {
    throw KeyDepletionError("authentication pool exhausted");
  }
  const std::uint64_t key = pool.withdraw_word(64, "wc-hash-key");
  const std::uint64_t pad = pool.withdraw_word(tag_len, "wc-pad");
  return wc_tag_with(key, pad, message, tag_len);
}

bool wc_verify(AuthKeyPool& pool, std::span<const std::uint8_t> message, std::uint64_t tag,
               std::size_t tag_len) {
  return wc_tag(pool, message, tag_len) == truncate(tag, tag_len);
}

}  // namespace cowqkd
