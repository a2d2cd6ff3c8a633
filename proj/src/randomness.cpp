// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "cowqkd/randomness.hpp"

#include <sodium.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "cowqkd/errors.hpp"

namespace cowqkd {

namespace {

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) {
    throw Error("libsodium initialisation failed");
  }
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

Seed seed_from_hex(std::string_view hex) {
  if (hex.starts_with("0x") || hex.starts_with("0X")) {
    hex.remove_prefix(2);
  }
  if (hex.empty() || hex.size() > 64) {
    throw ParameterError("seed must be 1..64 hex digits");
  }
  Seed seed{};
  // Right-align: last hex digit is the low nibble of seed[31].
  for (std::size_t i = 0; i < hex.size(); ++i) {
    const int v = hex_value(hex[hex.size() - 1 - i]);
    if (v < 0) {
      throw ParameterError("seed contains a non-hex character");
    }
    seed[31 - i / 2] |= static_cast<std::uint8_t>(v << (4 * (i % 2)));
  }
  return seed;
}

std::string seed_to_hex(const Seed& seed) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (auto b : seed) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 15]);
  }
  return s;
}

BitSource::BitSource(const Seed& seed) : seed_(seed) { ensure_sodium(); }

void BitSource::refill() {
  // Align to a 64-byte ChaCha block so the keystream offset is exact.
  const std::uint64_t block = counter_ / 512;
  buffer_start_bit_ = block * 512;
  static const std::array<std::uint8_t, kBufferBytes> zeros{};
  static constexpr std::uint8_t kNonce[crypto_stream_chacha20_NONCEBYTES] = {};
  crypto_stream_chacha20_xor_ic(buffer_.data(), zeros.data(), kBufferBytes, kNonce, block,
                                seed_.data());
  buffer_valid_ = true;
}

std::uint64_t BitSource::read(unsigned nbits) {
  if (nbits == 0) {
    return 0;
  }
  // Need bytes [off/8, off/8 + 9) inside the buffer.
  if (!buffer_valid_ || counter_ < buffer_start_bit_ ||
      counter_ + 72 > buffer_start_bit_ + kBufferBytes * 8) {
    refill();
  }
  const std::uint64_t off = counter_ - buffer_start_bit_;
  const std::size_t byte = off >> 3;
  const unsigned shift = off & 7;
  std::uint64_t lo = 0;
  std::memcpy(&lo, buffer_.data() + byte, 8);  // little-endian host assumed
  std::uint64_t v = lo >> shift;
  if (shift != 0) {
    v |= std::uint64_t{buffer_[byte + 8]} << (64 - shift);
  }
  if (nbits < 64) {
    v &= (std::uint64_t{1} << nbits) - 1;
  }
  counter_ += nbits;
  return v;
}

BitVector BitSource::next_bits(std::size_t n) {
  BitVector out(n);
  auto words = out.mutable_words();
  for (std::size_t w = 0; w < words.size(); ++w) {
    const std::size_t take = std::min<std::size_t>(64, n - 64 * w);
    words[w] = read(static_cast<unsigned>(take));
  }
  return out;
}

bool BitSource::bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ParameterError("bernoulli: p must be in [0, 1]");
  }
  const std::uint64_t draw = next_u64();
  if (p >= 1.0) {
    return true;
  }
  const double scaled = std::ldexp(p, 64);
  const std::uint64_t threshold = scaled >= 18446744073709551615.0
                                      ? std::numeric_limits<std::uint64_t>::max()
                                      : static_cast<std::uint64_t>(scaled);
  return draw < threshold;
}

double BitSource::next_unit() { return std::ldexp(static_cast<double>(next_u64() >> 11), -53); }

std::uint64_t BitSource::next_below(std::uint64_t bound) {
  if (bound == 0) {
    throw ParameterError("next_below: bound must be positive");
  }
  // Reject the top partial interval so every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  for (;;) {
    const std::uint64_t v = next_u64();
    if (v < limit) {
      return v % bound;
    }
  }
}

std::uint64_t BitSource::geometric(double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw ParameterError("geometric: p must be in (0, 1]");
  }
  const double u = 1.0 - next_unit();  // (0, 1]
  if (p >= 1.0) {
    return 0;
  }
  const double g = std::floor(std::log(u) / std::log1p(-p));
  if (g >= 1.8e19) {
    return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(g);
}

BitSource BitSource::fork(std::string_view label) const {
  if (label.empty()) {
    throw ParameterError("fork: label must be non-empty");
  }
  Seed child{};
  crypto_generichash(child.data(), child.size(), reinterpret_cast<const unsigned char*>(label.data()),
                     label.size(), seed_.data(), seed_.size());
  return BitSource(child);
}

}  // namespace cowqkd
