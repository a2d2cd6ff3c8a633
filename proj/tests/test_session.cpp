// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "cowqkd/errors.hpp"
#include "cowqkd/session.hpp"
#include "oracles.hpp"

using namespace cowqkd;

namespace {

const Seed kSeed = seed_from_hex("5e55");

const SessionResult& session_250() {
  static const SessionResult r = run_session(default_link(250), SessionConfig{}, kSeed);
  return r;
}

const SessionResult& session_100() {
  static const SessionResult r = run_session(default_link(100), SessionConfig{}, kSeed);
  return r;
}

}  // namespace

TEST_CASE("frame layout") {
  Message m{MessageType::kSiftAnnounce, 0x0102030405060708ULL, {0xab}, 0x1122334455667788ULL};
  const auto f = encode_message(m);
  REQUIRE(f.size() == 22);
  CHECK(f == std::vector<std::uint8_t>{0, 0, 0, 1, 1, 1, 2, 3, 4, 5, 6, 7, 8, 0xab,
                                       0x11, 0x22, 0x33, 0x44, 0x55, 0x66, 0x77, 0x88});
  CHECK(authenticated_bytes(m) == std::vector<std::uint8_t>(f.begin(), f.end() - 8));
  CHECK(decode_message(f) == m);
}

TEST_CASE("every message type round-trips") {
  BitSource src(seed_from_hex("f4"));
  for (int t = 1; t <= 9; ++t) {
    for (std::size_t len : {0u, 1u, 7u, 300u}) {
      Message m{static_cast<MessageType>(t), src.next_u64(), src.next_bits(8 * len).to_bytes(),
                src.next_u64()};
      CHECK(decode_message(encode_message(m)) == m);
    }
    CHECK(std::string(message_type_name(static_cast<MessageType>(t))) != "?");
  }
  CHECK(std::string(message_type_name(MessageType::kParityRequest)) == "PARITY_REQUEST");
}

TEST_CASE("malformed frames") {
  const Message m{MessageType::kPaSeed, 3, {1, 2, 3, 4}, 99};
  const auto f = encode_message(m);
  for (std::size_t cut = 0; cut < f.size(); ++cut) {
    CHECK_THROWS_AS(decode_message(std::span(f.data(), cut)), FrameError);
  }
  auto unknown = f;
  unknown[4] = 42;
  try {
    decode_message(unknown);
    FAIL("accepted an unknown type");
  } catch (const FrameError& e) {
    CHECK(e.position() == 4);
  }
  auto trailing = f;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_message(trailing), FrameError);

  // Tag check: mismatch reported at the tag.
  const auto good = [](std::span<const std::uint8_t>) { return std::uint64_t{99}; };
  const auto bad = [](std::span<const std::uint8_t>) { return std::uint64_t{98}; };
  CHECK(decode_message(f, good) == m);
  try {
    decode_message(f, bad);
    FAIL("accepted a bad tag");
  } catch (const FrameError& e) {
    CHECK(e.position() == kFrameHeaderBytes + 4);
  }

  // Concatenated frames; errors carry absolute positions.
  auto stream = f;
  const Message m2{MessageType::kAbort, 4, {}, 1};
  const auto f2 = encode_message(m2);
  stream.insert(stream.end(), f2.begin(), f2.end());
  CHECK(decode_frames(stream) == std::vector<Message>{m, m2});
  stream[f.size() + 4] = 0;
  try {
    decode_frames(stream);
    FAIL("accepted type 0");
  } catch (const FrameError& e) {
    CHECK(e.position() == f.size() + 4);
  }
  stream.resize(f.size() + 5);
  CHECK_THROWS_AS(decode_frames(stream), FrameError);
}

TEST_CASE("key store examples") {
  KeyStore s;
  CHECK_THROWS_AS(s.withdraw_auth(1), KeyDepletionError);
  s.deposit(0, BitVector(1000, true));
  s.withdraw_auth(1000);
  CHECK(s.available() == 0);
  CHECK(s.total_consumed() == 1000);
  CHECK(s.auth().available() == 1000);
  CHECK_THROWS_AS(s.deposit(0, BitVector(10)), ParameterError);
}

TEST_CASE("key store conservation under random operations") {
  BitSource src(seed_from_hex("c5"));
  KeyStore s(src.next_bits(100));
  BitVector ledger_stored;  // oracle: bits in deposit order, not yet withdrawn
  BitVector ledger_auth = s.auth().history();
  std::uint64_t next_id = 0;
  for (int op = 0; op < 1000; ++op) {
    if (src.bernoulli(0.5)) {
      const BitVector bits = src.next_bits(src.next_below(500));
      s.deposit(next_id++, bits);
      ledger_stored.append(bits);
    } else {
      const std::size_t n = src.next_below(600);
      if (n > ledger_stored.size()) {
        CHECK_THROWS_AS(s.withdraw_auth(n), KeyDepletionError);
      } else {
        const BitVector got = s.withdraw_auth(n);
        CHECK(got == ledger_stored.slice(0, n));
        ledger_auth.append(got);
        ledger_stored = ledger_stored.slice(n, ledger_stored.size() - n);
      }
    }
    REQUIRE(s.total_generated() == s.stored() + s.total_consumed());
    REQUIRE(s.stored() == ledger_stored.size());
  }
  CHECK(s.stored_bits() == ledger_stored);
  CHECK(s.auth().history() == ledger_auth);
  std::set<std::uint64_t> ids;
  for (const auto& b : s.blocks()) CHECK(ids.insert(b.id).second);
}

TEST_CASE("session authenticator") {
  BitSource src(seed_from_hex("5a"));
  AuthKeyPool pool(src.next_bits(64 + 3 * 64));
  SessionAuthenticator auth;
  const std::vector<std::uint8_t> msg{1, 2, 3};
  CHECK_THROWS_AS(auth.tag(pool, msg), ProtocolViolation);
  auth.rekey(pool);
  CHECK(auth.key_offset() == 0);
  const std::uint64_t t1 = auth.tag(pool, msg);
  CHECK(auth.last_pad_offset() == 64);
  const std::uint64_t t2 = auth.tag(pool, msg);
  CHECK(auth.last_pad_offset() == 128);
  CHECK(t1 != t2);
  CHECK(t1 == wc_tag_with(pool.history().read_word(0), pool.history().read_word(64), msg));
  auth.tag(pool, msg);
  CHECK_THROWS_AS(auth.tag(pool, msg), KeyDepletionError);
}

TEST_CASE("dead link aborts with no detections") {
  LinkParams l = default_link(100);
  l.data_detector.efficiency = 0;
  SessionConfig cfg;
  cfg.block_timeout_s = 60;
  const auto r = run_session(l, cfg, kSeed);
  CHECK(r.report.aborted());
  CHECK(r.report.abort_reason.find("no detections") != std::string::npos);
  CHECK(r.report.blocks.empty());
  CHECK(r.alice_store.stored() == 0);
}

TEST_CASE("0 km noiseless link, one block") {
  LinkParams l = default_link(0);
  l.data_detector.dark_rate_hz = 0;
  SessionConfig cfg;
  cfg.n_blocks = 1;
  const auto r = run_session(l, cfg, kSeed);
  REQUIRE_FALSE(r.report.aborted());
  REQUIRE(r.report.blocks.size() == 1);
  const auto& blk = r.report.blocks[0];
  CHECK(blk.confirmed);
  CHECK(r.alice_store.stored_bits() == r.bob_store.stored_bits());
  const double e = l.protocol.optical_error;
  const double q = e / (1 + e);  // no darks: the empty half clicks with e p_signal
  CHECK(std::fabs(blk.record.qber - q) <= 3 * std::sqrt(q * (1 - q) / 32768.0));
}

TEST_CASE("250 km defaults, three blocks") {
  const auto& r = session_250();
  REQUIRE_FALSE(r.report.aborted());
  REQUIRE(r.report.blocks.size() == 3);
  std::size_t secret = 0;
  double prev_t = 0;
  for (const auto& blk : r.report.blocks) {
    CHECK(blk.record.n_sifted == 32768);
    CHECK(blk.record.qber >= 0.014);
    CHECK(blk.record.qber <= 0.024);
    CHECK(blk.record.secret_len > 0);
    CHECK(blk.record.secret_len <= blk.record.n_sifted);
    CHECK(blk.confirmed);
    CHECK_FALSE(blk.visibility_reliable);  // too few monitor counts: floor used
    CHECK(blk.record.visibility == SessionConfig{}.visibility_floor);
    CHECK(blk.sim_time_s > prev_t);
    prev_t = blk.sim_time_s;
    secret += blk.record.secret_len;
  }
  // No key before the first block is full.
  CHECK(r.report.blocks[0].sim_time_s > r.report.alignment_time_s + 60.0);
  const double rate = r.report.average_secret_rate_bps;
  CHECK(rate == doctest::Approx(static_cast<double>(secret) / r.report.sim_duration_s));
  CHECK(rate >= 1.5);
  CHECK(rate <= 150.0);

  std::ostringstream summary;
  r.report.write_summary(summary);
  CHECK(summary.str().find("approx. 7000") != std::string::npos);
}

TEST_CASE("final keys agree out of band") {
  for (const auto* r : {&session_250(), &session_100()}) {
    REQUIRE_FALSE(r->report.aborted());
    REQUIRE(r->alice_store.blocks().size() == r->bob_store.blocks().size());
    for (std::size_t i = 0; i < r->alice_store.blocks().size(); ++i) {
      CHECK(r->alice_store.blocks()[i].bits == r->bob_store.blocks()[i].bits);
      CHECK(r->alice_store.blocks()[i].bits.size() == r->report.blocks[i].record.secret_len);
    }
    CHECK(r->alice_store.total_generated() ==
          r->alice_store.stored() + r->alice_store.total_consumed());
  }
}

TEST_CASE("determinism") {
  const auto a = run_session(default_link(250), SessionConfig{}, kSeed);
  const auto& b = session_250();
  CHECK(transcript_bytes(a.transcript) == transcript_bytes(b.transcript));
  std::ostringstream ca, cb;
  a.report.write_csv(ca);
  b.report.write_csv(cb);
  CHECK(ca.str() == cb.str());
  std::ostringstream la, lb;
  write_transcript_ledger(la, a.transcript);
  write_transcript_ledger(lb, b.transcript);
  CHECK(la.str() == lb.str());

  const auto c = run_session(default_link(250), SessionConfig{}, seed_from_hex("5e56"));
  CHECK(transcript_bytes(c.transcript) != transcript_bytes(b.transcript));
}

TEST_CASE("transcript replays and detects tampering") {
  const auto& r = session_250();
  const BitVector& history = r.alice_store.auth().history();
  CHECK(history == r.bob_store.auth().history());
  CHECK_FALSE(verify_transcript(r.transcript, history).has_value());

  // Sequence numbers increase per direction.
  std::uint64_t next[2] = {0, 0};
  for (const auto& e : r.transcript) {
    const auto m = decode_message(e.frame);
    CHECK(m.seq == next[static_cast<int>(e.direction)]++);
  }

  BitSource src(seed_from_hex("b1"));
  for (int trial = 0; trial < 200; ++trial) {
    Transcript t = r.transcript;
    const std::size_t i = src.next_below(t.size());
    const std::size_t bit = src.next_below(8 * t[i].frame.size());
    t[i].frame[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    const auto bad = verify_transcript(t, history);
    REQUIRE(bad.has_value());
    CHECK(*bad == i);
  }

  std::ostringstream bin;
  write_transcript(bin, r.transcript);
  const std::string s = bin.str();
  const auto frames = decode_frames(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  CHECK(frames.size() == r.transcript.size());
}

TEST_CASE("authentication key bits are never reused") {
  const auto& r = session_250();
  std::set<std::size_t> used;
  std::set<std::size_t> hash_keys;
  for (const auto& e : r.transcript) hash_keys.insert(e.hash_key_offset);
  CHECK(hash_keys.size() == r.report.blocks.size());
  for (const auto& e : r.alice_store.auth().ledger()) {
    for (std::size_t b = e.offset; b < e.offset + e.length; ++b) REQUIRE(used.insert(b).second);
  }
  std::set<std::size_t> pads;
  for (const auto& e : r.transcript) {
    CHECK(pads.insert(e.pad_offset).second);
    CHECK(used.count(e.pad_offset));
    CHECK(hash_keys.count(e.pad_offset) == 0);
  }
}

TEST_CASE("tampering on the wire aborts the session") {
  SessionConfig cfg;
  cfg.n_blocks = 1;
  cfg.tap = [](std::size_t index, std::vector<std::uint8_t>& frame) {
    if (index == 5) frame[kFrameHeaderBytes] ^= 1;
  };
  const auto r = run_session(default_link(100), cfg, kSeed);
  CHECK(r.report.aborted());
  CHECK(r.report.abort_reason.rfind("authentication failure", 0) == 0);
  CHECK(r.alice_store.stored() == 0);
  CHECK(r.bob_store.stored() == 0);
}

TEST_CASE("visibility abort policy") {
  SessionConfig cfg;
  cfg.visibility_fallback = VisibilityFallback::kAbort;
  cfg.n_blocks = 1;
  const auto r = run_session(default_link(250), cfg, kSeed);
  CHECK(r.report.aborted());
  CHECK(r.report.abort_reason.find("visibility unreliable") != std::string::npos);
}

TEST_CASE("authentication is paid for by the key it protects at 100 km") {
  const auto& r = session_100();
  REQUIRE_FALSE(r.report.aborted());
  std::size_t auth = 0, secret = 0;
  for (const auto& blk : r.report.blocks) {
    CHECK(blk.visibility_reliable);
    CHECK(blk.auth_bits * 2 < blk.record.secret_len);
    auth += blk.auth_bits;
    secret += blk.record.secret_len;
  }
  MESSAGE("auth bits / secret bits at 100 km: " << static_cast<double>(auth) / secret);
  CHECK(static_cast<double>(auth) <= 0.35 * static_cast<double>(secret));
  // Refills only replace what was spent, so the store keeps the rest.
  CHECK(r.alice_store.total_generated() == secret);
  CHECK(r.alice_store.total_consumed() <= auth);
  CHECK(r.alice_store.stored() >= secret - auth);
}

TEST_CASE("long sessions refill authentication from stored key") {
  SessionConfig cfg;
  cfg.n_blocks = 8;
  cfg.bootstrap_key_bits = 4000;
  const auto r = run_session(default_link(100), cfg, kSeed);
  CHECK_FALSE(r.report.aborted());
  CHECK(r.alice_store.total_consumed() > 0);
  CHECK(r.alice_store.total_generated() == r.alice_store.stored() + r.alice_store.total_consumed());
}

TEST_CASE("config validation") {
  SessionConfig cfg;
  cfg.block_size = 10;
  CHECK_THROWS_AS(run_session(default_link(10), cfg, kSeed), ParameterError);
  cfg = SessionConfig{};
  cfg.eve_bound = "bogus";
  CHECK_THROWS_AS(run_session(default_link(10), cfg, kSeed), ParameterError);
  cfg = SessionConfig{};
  cfg.tag_len = 65;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
}
