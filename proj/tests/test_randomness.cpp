// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <set>

#include "cowqkd/errors.hpp"
#include "cowqkd/randomness.hpp"
#include "oracles.hpp"

using namespace cowqkd;

namespace {

const Seed kSeed = seed_from_hex("5eed");

}  // namespace

TEST_CASE("seed hex parsing") {
  const Seed s = seed_from_hex("0x1f");
  CHECK(s[31] == 0x1f);
  for (int i = 0; i < 31; ++i) CHECK(s[i] == 0);
  CHECK(seed_from_hex("abc")[30] == 0x0a);
  CHECK(seed_from_hex("abc")[31] == 0xbc);
  CHECK(seed_to_hex(seed_from_hex("abc")) == std::string(61, '0') + "abc");
  CHECK_THROWS_AS(seed_from_hex(""), ParameterError);
  CHECK_THROWS_AS(seed_from_hex("xyz"), ParameterError);
  CHECK_THROWS_AS(seed_from_hex(std::string(65, '1')), ParameterError);
}

TEST_CASE("zero key reproduces the published ChaCha20 keystream") {
  // First 16 keystream bytes for the all-zero key and nonce, block 0.
  const std::uint8_t expected[16] = {0x76, 0xb8, 0xe0, 0xad, 0xa0, 0xf1, 0x3d, 0x90,
                                     0x40, 0x5d, 0x6a, 0xe5, 0x53, 0x86, 0xbd, 0x28};
  BitSource src(Seed{});
  const BitVector bits = src.next_bits(128);
  for (int byte = 0; byte < 16; ++byte) {
    for (int b = 0; b < 8; ++b) {
      CHECK(bits.get(8 * byte + b) == (((expected[byte] >> b) & 1) != 0));
    }
  }
}

TEST_CASE("next_bits: length, counter, determinism") {
  BitSource a(kSeed);
  CHECK(a.next_bits(0).empty());
  CHECK(a.counter() == 0);
  const BitVector x = a.next_bits(64);
  CHECK(x.size() == 64);
  CHECK(a.counter() == 64);
  BitSource b(kSeed);
  CHECK(b.next_bits(64) == x);

  // Reading in odd-sized pieces gives the same stream as one big read.
  BitSource c(kSeed), d(kSeed);
  const BitVector whole = c.next_bits(10000);
  BitVector pieces;
  std::size_t n = 0;
  for (std::size_t step = 1; n < 10000; step = step * 7 % 97 + 1) {
    const std::size_t take = std::min<std::size_t>(step, 10000 - n);
    pieces.append(d.next_bits(take));
    n += take;
  }
  CHECK(pieces == whole);
  CHECK(d.counter() == 10000);
}

TEST_CASE("next_bits: ones fraction of 10^6 bits within binomial bound") {
  BitSource src(kSeed);
  const double ones = static_cast<double>(src.next_bits(1000000).popcount());
  const auto [lo, hi] = oracle::binomial_3sigma(1e6, 0.5);
  CHECK(ones >= lo);
  CHECK(ones <= hi);
  CHECK(ones / 1e6 >= 0.497);
  CHECK(ones / 1e6 <= 0.503);
}

TEST_CASE("monobit and runs tests at significance 0.01") {
  for (const char* hex : {"1", "2", "3"}) {
    BitSource src(seed_from_hex(hex));
    const std::size_t n = 1000000;
    const BitVector bits = src.next_bits(n);
    const double ones = static_cast<double>(bits.popcount());
    const double s = 2.0 * ones - static_cast<double>(n);
    const double p_mono = std::erfc(std::fabs(s) / std::sqrt(2.0 * n));
    CHECK(p_mono >= 0.01);

    const double pi = ones / n;
    REQUIRE(std::fabs(pi - 0.5) < 2.0 / std::sqrt(static_cast<double>(n)));
    double runs = 1;
    for (std::size_t i = 1; i < n; ++i) runs += bits.get(i) != bits.get(i - 1);
    const double p_runs = std::erfc(std::fabs(runs - 2.0 * n * pi * (1 - pi)) /
                                    (2.0 * std::sqrt(2.0 * n) * pi * (1 - pi)));
    CHECK(p_runs >= 0.01);
  }
}

TEST_CASE("bernoulli") {
  BitSource src(kSeed);
  for (int i = 0; i < 1000; ++i) CHECK_FALSE(src.bernoulli(0.0));
  for (int i = 0; i < 1000; ++i) CHECK(src.bernoulli(1.0));
  CHECK_THROWS_AS(src.bernoulli(-0.1), ParameterError);
  CHECK_THROWS_AS(src.bernoulli(1.1), ParameterError);
  CHECK_THROWS_AS(src.bernoulli(std::nan("")), ParameterError);

  const std::uint64_t before = src.counter();
  src.bernoulli(0.3);
  CHECK(src.counter() - before == 64);

  std::size_t hits = 0;
  for (int i = 0; i < 1000000; ++i) hits += src.bernoulli(0.1);
  CHECK(hits >= 97000);
  CHECK(hits <= 103000);
}

TEST_CASE("bernoulli compares the 64-bit draw against floor(p * 2^64)") {
  BitSource a(kSeed), b(kSeed);
  for (int i = 0; i < 1000; ++i) {
    const double p = (i % 100) / 100.0;
    const std::uint64_t draw = b.next_u64();
    const long double threshold = std::floor(static_cast<long double>(p) * 18446744073709551616.0L);
    CHECK(a.bernoulli(p) == (static_cast<long double>(draw) < threshold));
  }
}

TEST_CASE("fork") {
  const BitSource parent(kSeed);
  CHECK(parent.fork("alice").next_bits(256) == parent.fork("alice").next_bits(256));
  CHECK(parent.fork("alice").next_bits(128) != parent.fork("bob").next_bits(128));
  CHECK_THROWS_AS(parent.fork(""), ParameterError);

  BitSource p1(kSeed), p2(kSeed);
  p1.next_bits(100);
  p2.next_bits(100);
  (void)p1.fork("a").next_bits(1000);
  CHECK(p1.next_bits(512) == p2.next_bits(512));

  // Children depend on (seed, label) only, not on how far the parent has read.
  BitSource p3(kSeed);
  p3.next_bits(12345);
  CHECK(p3.fork("alice").next_bits(256) == parent.fork("alice").next_bits(256));

  // Child streams are unrelated to the parent stream.
  BitSource fresh(kSeed);
  CHECK(parent.fork("alice").next_bits(128) != fresh.next_bits(128));
}

TEST_CASE("next_below and geometric") {
  BitSource src(kSeed);
  std::vector<int> hist(6, 0);
  for (int i = 0; i < 60000; ++i) ++hist[src.next_below(6)];
  for (int h : hist) {
    const auto [lo, hi] = oracle::binomial_3sigma(60000, 1.0 / 6.0);
    CHECK(h >= lo);
    CHECK(h <= hi);
  }
  CHECK_THROWS_AS(src.next_below(0), ParameterError);

  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += static_cast<double>(src.geometric(0.01));
  // Failures before the first success: mean (1-p)/p = 99, sd sqrt(1-p)/p.
  const double sd_mean = std::sqrt(0.99) / 0.01 / std::sqrt(static_cast<double>(n));
  CHECK(std::fabs(sum / n - 99.0) < 4.0 * sd_mean);
  CHECK(src.geometric(1.0) == 0);
  CHECK_THROWS_AS(src.geometric(0.0), ParameterError);
}
