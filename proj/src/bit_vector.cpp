// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "cowqkd/bit_vector.hpp"

#include <cctype>

#include "cowqkd/errors.hpp"

namespace cowqkd {

namespace {

constexpr std::size_t words_for(std::size_t nbits) { return (nbits + 63) / 64; }

std::uint64_t low_mask(std::size_t n) {
  return n >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1);
}

}  // namespace

BitVector::BitVector(std::size_t size, bool value)
    : words_(words_for(size), value ? ~std::uint64_t{0} : 0), size_(size) {
  clear_tail();
}

BitVector BitVector::from_string(std::string_view bits) {
  BitVector out;
  for (char c : bits) {
    if (c == '0' || c == '1') {
      out.push_back(c == '1');
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      throw ParameterError(std::string("invalid bit character '") + c + "'");
    }
  }
  return out;
}

BitVector BitVector::from_bytes(std::span<const std::uint8_t> bytes, std::size_t nbits) {
  if (bytes.size() * 8 < nbits) {
    throw ParameterError("byte buffer too short for requested bit count");
  }
  BitVector out(nbits);
  for (std::size_t i = 0; i < words_for(nbits) * 8 && i < bytes.size(); ++i) {
    out.words_[i / 8] |= std::uint64_t{bytes[i]} << (8 * (i % 8));
  }
  out.clear_tail();
  return out;
}

void BitVector::push_back(bool v) {
  if ((size_ & 63) == 0) {
    words_.push_back(0);
  }
  ++size_;
  set(size_ - 1, v);
}

void BitVector::append(const BitVector& other) {
  const std::size_t old = size_;
  resize(size_ + other.size_);
  if ((old & 63) == 0) {
    for (std::size_t w = 0; w < other.words_.size(); ++w) {
      words_[old / 64 + w] = other.words_[w];
    }
    return;
  }
  const unsigned shift = old & 63;
  for (std::size_t w = 0; w < other.words_.size(); ++w) {
    const std::uint64_t v = other.words_[w];
    words_[old / 64 + w] |= v << shift;
    if (old / 64 + w + 1 < words_.size()) {
      words_[old / 64 + w + 1] |= v >> (64 - shift);
    }
  }
  clear_tail();
}

void BitVector::resize(std::size_t n) {
  words_.resize(words_for(n), 0);
  size_ = n;
  clear_tail();
}

BitVector BitVector::slice(std::size_t from, std::size_t n) const {
  if (from + n > size_) {
    throw ParameterError("slice out of range");
  }
  BitVector out(n);
  for (std::size_t w = 0; w < out.words_.size(); ++w) {
    out.words_[w] = read_word(from + 64 * w);
  }
  out.clear_tail();
  return out;
}

std::uint64_t BitVector::read_word(std::size_t from) const noexcept {
  if (from >= size_) {
    return 0;
  }
  const std::size_t w = from >> 6;
  const unsigned shift = from & 63;
  std::uint64_t v = words_[w] >> shift;
  if (shift != 0 && w + 1 < words_.size()) {
    v |= words_[w + 1] << (64 - shift);
  }
  return v;
}

std::size_t BitVector::popcount() const noexcept {
  std::size_t n = 0;
  for (auto w : words_) {
    n += static_cast<std::size_t>(std::popcount(w));
  }
  return n;
}

bool BitVector::parity(std::size_t lo, std::size_t hi) const noexcept {
  if (hi <= lo) {
    return false;
  }
  const std::size_t wlo = lo >> 6;
  const std::size_t whi = (hi - 1) >> 6;
  if (wlo == whi) {
    const std::uint64_t m = low_mask(hi - lo) << (lo & 63);
    return std::popcount(words_[wlo] & m) & 1;
  }
  std::uint64_t acc = words_[wlo] & (~std::uint64_t{0} << (lo & 63));
  for (std::size_t w = wlo + 1; w < whi; ++w) {
    acc ^= words_[w];
  }
  acc ^= words_[whi] & low_mask(hi - (whi << 6));
  return std::popcount(acc) & 1;
}

std::size_t BitVector::hamming_distance(const BitVector& other) const {
  if (other.size_ != size_) {
    throw ParameterError("hamming_distance: size mismatch");
  }
  std::size_t n = 0;
  for (std::size_t w = 0; w < words_.size(); ++w) {
    n += static_cast<std::size_t>(std::popcount(words_[w] ^ other.words_[w]));
  }
  return n;
}

BitVector& BitVector::operator^=(const BitVector& other) {
  if (other.size_ != size_) {
    throw ParameterError("xor: size mismatch");
  }
  for (std::size_t w = 0; w < words_.size(); ++w) {
    words_[w] ^= other.words_[w];
  }
  return *this;
}

std::vector<std::uint8_t> BitVector::to_bytes() const {
  std::vector<std::uint8_t> out((size_ + 7) / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(words_[i / 8] >> (8 * (i % 8)));
  }
  return out;
}

std::string BitVector::to_string() const {
  std::string s(size_, '0');
  for (std::size_t i = 0; i < size_; ++i) {
    if (get(i)) {
      s[i] = '1';
    }
  }
  return s;
}

void BitVector::clear_tail() noexcept {
  if ((size_ & 63) != 0 && !words_.empty()) {
    words_.back() &= low_mask(size_ & 63);
  }
}

}  // namespace cowqkd
