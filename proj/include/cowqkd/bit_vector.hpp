// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cowqkd {

/// Packed bit-string. Bit i lives in word i/64 at bit position i%64.
/// Unused high bits of the last word are kept zero.
class BitVector {
 public:
  BitVector() = default;
  explicit BitVector(std::size_t size, bool value = false);

  /// Parses a string of '0'/'1' characters (whitespace ignored).
  static BitVector from_string(std::string_view bits);
  static BitVector from_bytes(std::span<const std::uint8_t> bytes, std::size_t nbits);

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }

  bool get(std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1U; }
  bool operator[](std::size_t i) const noexcept { return get(i); }

  void set(std::size_t i, bool v) noexcept {
    const std::uint64_t mask = std::uint64_t{1} << (i & 63);
    if (v) {
      words_[i >> 6] |= mask;
    } else {
      words_[i >> 6] &= ~mask;
    }
  }
  void flip(std::size_t i) noexcept { words_[i >> 6] ^= std::uint64_t{1} << (i & 63); }

  void push_back(bool v);
  void append(const BitVector& other);
  void resize(std::size_t n);
  void clear() noexcept {
    words_.clear();
    size_ = 0;
  }

  /// Bits [from, from + n) as a new vector.
  BitVector slice(std::size_t from, std::size_t n) const;

  /// Up to 64 bits starting at `from`, LSB first. Bits beyond size() read as 0.
  std::uint64_t read_word(std::size_t from) const noexcept;

  std::size_t popcount() const noexcept;
  /// XOR of bits [lo, hi).
  bool parity(std::size_t lo, std::size_t hi) const noexcept;
  bool parity() const noexcept { return parity(0, size_); }

  /// Number of positions where the two vectors differ. Sizes must match.
  std::size_t hamming_distance(const BitVector& other) const;

  BitVector& operator^=(const BitVector& other);
  friend BitVector operator^(BitVector a, const BitVector& b) { return a ^= b; }
  bool operator==(const BitVector& other) const = default;

  std::span<const std::uint64_t> words() const noexcept { return words_; }
  std::span<std::uint64_t> mutable_words() noexcept { return words_; }

  /// Packs into ceil(size/8) bytes, bit i at byte i/8 bit i%8.
  std::vector<std::uint8_t> to_bytes() const;
  std::string to_string() const;

 private:
  void clear_tail() noexcept;

  std::vector<std::uint64_t> words_;
  std::size_t size_ = 0;
};

}  // namespace cowqkd
