// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <string>

#include "cowqkd/errors.hpp"
#include "cowqkd/randomness.hpp"
#include "cowqkd/toeplitz.hpp"
#include "oracles.hpp"

using namespace cowqkd;

namespace {

std::vector<int> to_ints(const BitVector& b) {
  std::vector<int> v(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) v[i] = b.get(i);
  return v;
}

}  // namespace

TEST_CASE("worked example") {
  const BitVector out = toeplitz_hash(BitVector::from_string("1011"), BitVector::from_string("110"), 2);
  CHECK(out.to_string() == "10");
  CHECK(toeplitz_hash(BitVector::from_string("11"), BitVector::from_string("110"), 0).empty());
}

TEST_CASE("seed length is checked") {
  CHECK_THROWS_AS(toeplitz_hash(BitVector(5), BitVector(3), 2), ParameterError);
  CHECK_THROWS_AS(toeplitz_hash(BitVector(3), BitVector(3), 2), ParameterError);
  CHECK_THROWS_AS(ToeplitzSeed(BitVector(7), 4, 5), ParameterError);
  CHECK_NOTHROW(ToeplitzSeed(BitVector(8), 4, 5));
}

TEST_CASE("matches the dense matrix product on every input up to length 12") {
  BitSource src(seed_from_hex("70e"));
  for (int s = 0; s < 100; ++s) {
    for (std::size_t len = 1; len <= 12; ++len) {
      const std::size_t out_len = 1 + (s + len) % 16;
      const BitVector seed = src.next_bits(len + out_len - 1);
      const auto seed_ints = to_ints(seed);
      for (std::uint32_t x = 0; x < (1u << len); ++x) {
        BitVector in(len);
        for (std::size_t j = 0; j < len; ++j) in.set(j, (x >> j) & 1);
        const auto fast = to_ints(toeplitz_hash(seed, in, out_len));
        REQUIRE(fast == oracle::toeplitz_naive(seed_ints, to_ints(in), out_len));
      }
    }
  }
}

TEST_CASE("matches the dense product on long inputs") {
  BitSource src(seed_from_hex("1009"));
  for (std::size_t len : {63u, 64u, 65u, 127u, 200u, 1000u}) {
    for (std::size_t out_len : {1u, 63u, 64u, 130u}) {
      const BitVector seed = src.next_bits(len + out_len - 1);
      const BitVector in = src.next_bits(len);
      CHECK(to_ints(toeplitz_hash(seed, in, out_len)) ==
            oracle::toeplitz_naive(to_ints(seed), to_ints(in), out_len));
    }
  }
}

TEST_CASE("GF(2) linearity") {
  BitSource src(seed_from_hex("11"));
  const std::size_t n = 777, out = 300;
  const ToeplitzSeed seed(src.next_bits(n + out - 1), n, out);
  for (int i = 0; i < 1000; ++i) {
    const BitVector x = src.next_bits(n);
    const BitVector y = src.next_bits(n);
    BitVector xy = x;
    xy ^= y;
    BitVector hx = toeplitz_hash(seed, x);
    hx ^= toeplitz_hash(seed, y);
    REQUIRE(toeplitz_hash(seed, xy) == hx);
  }
}

TEST_CASE("collision rate of a fixed pair is at most 2^-16 + 3 sigma") {
  BitSource src(seed_from_hex("c011"));
  const std::size_t n = 256, out = 16, draws = 10000;
  const double p = std::ldexp(1.0, -16);
  const double bound = p + 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(draws));
  for (int pair = 0; pair < 3; ++pair) {
    const BitVector x = src.next_bits(n);
    BitVector y = x;
    y.flip(static_cast<std::size_t>(pair * 97));  // differences near both ends too
    if (pair == 2) y = src.next_bits(n);
    REQUIRE(x != y);
    std::size_t collisions = 0;
    for (std::size_t d = 0; d < draws; ++d) {
      const BitVector seed = src.next_bits(n + out - 1);
      collisions += toeplitz_hash(seed, x, out) == toeplitz_hash(seed, y, out);
    }
    CHECK(static_cast<double>(collisions) / draws <= bound);
  }
}
