// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "cowqkd/session.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "cowqkd/cascade.hpp"
#include "cowqkd/errors.hpp"
#include "cowqkd/toeplitz.hpp"

namespace cowqkd {

const char* message_type_name(MessageType type) noexcept {
  switch (type) {
    case MessageType::kSiftAnnounce:
      return "SIFT_ANNOUNCE";
    case MessageType::kDecoyReport:
      return "DECOY_REPORT";
    case MessageType::kVisibilityReport:
      return "VISIBILITY_REPORT";
    case MessageType::kParityRequest:
      return "PARITY_REQUEST";
    case MessageType::kParityResponse:
      return "PARITY_RESPONSE";
    case MessageType::kShuffleSeed:
      return "SHUFFLE_SEED";
    case MessageType::kPaSeed:
      return "PA_SEED";
    case MessageType::kKeyConfirm:
      return "KEY_CONFIRM";
    case MessageType::kAbort:
      return "ABORT";
  }
  return "UNKNOWN";
}

namespace {

void put_be(std::vector<std::uint8_t>& out, std::uint64_t v, unsigned bytes) {
  for (unsigned i = bytes; i-- > 0;) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

std::uint64_t get_be(std::span<const std::uint8_t> in, std::size_t pos, unsigned bytes) {
  std::uint64_t v = 0;
  for (unsigned i = 0; i < bytes; ++i) {
    v = (v << 8) | in[pos + i];
  }
  return v;
}

bool known_type(std::uint8_t t) { return t >= 1 && t <= 9; }

// Parses one frame starting at `base` within `bytes`; returns its length.
std::size_t parse_frame(std::span<const std::uint8_t> bytes, std::size_t base, Message& msg) {
  const std::size_t avail = bytes.size() - base;
  if (avail < kFrameHeaderBytes + kFrameTagBytes) {
    throw FrameError("truncated frame header", bytes.size());
  }
  const std::uint64_t len = get_be(bytes, base, 4);
  const std::uint8_t type = bytes[base + 4];
  if (!known_type(type)) {
    throw FrameError("unknown message type " + std::to_string(type), base + 4);
  }
  if (len > avail - kFrameHeaderBytes - kFrameTagBytes) {
    throw FrameError("frame length " + std::to_string(len) + " exceeds the buffer", base);
  }
  msg.type = static_cast<MessageType>(type);
  msg.seq = get_be(bytes, base + 5, 8);
  const auto payload = bytes.subspan(base + kFrameHeaderBytes, len);
  msg.payload.assign(payload.begin(), payload.end());
  msg.tag = get_be(bytes, base + kFrameHeaderBytes + len, 8);
  return kFrameHeaderBytes + len + kFrameTagBytes;
}

}  // namespace

std::vector<std::uint8_t> authenticated_bytes(const Message& msg) {
  if (msg.payload.size() > 0xFFFFFFFFu) {
    throw ParameterError("payload longer than 2^32 - 1 bytes");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeaderBytes + msg.payload.size() + kFrameTagBytes);
  put_be(out, msg.payload.size(), 4);
  out.push_back(static_cast<std::uint8_t>(msg.type));
  put_be(out, msg.seq, 8);
  out.insert(out.end(), msg.payload.begin(), msg.payload.end());
  return out;
}

std::vector<std::uint8_t> encode_message(const Message& msg) {
  auto out = authenticated_bytes(msg);
  put_be(out, msg.tag, 8);
  return out;
}

Message decode_message(std::span<const std::uint8_t> frame) {
  Message msg;
  const std::size_t used = parse_frame(frame, 0, msg);
  if (used != frame.size()) {
    throw FrameError("trailing bytes after frame", used);
  }
  return msg;
}

Message decode_message(
    std::span<const std::uint8_t> frame,
    const std::function<std::uint64_t(std::span<const std::uint8_t>)>& expected_tag) {
  Message msg = decode_message(frame);
  const std::size_t tag_pos = frame.size() - kFrameTagBytes;
  if (expected_tag(frame.first(tag_pos)) != msg.tag) {
    throw FrameError("authentication tag mismatch", tag_pos);
  }
  return msg;
}

std::vector<Message> decode_frames(std::span<const std::uint8_t> bytes) {
  std::vector<Message> out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    Message msg;
    pos += parse_frame(bytes, pos, msg);
    out.push_back(std::move(msg));
  }
  return out;
}

void SessionAuthenticator::rekey(AuthKeyPool& pool) {
  key_offset_ = pool.consumed();
  key_ = pool.withdraw_word(64, "wc-hash-key");
}

std::uint64_t SessionAuthenticator::tag(AuthKeyPool& pool, std::span<const std::uint8_t> bytes) {
  if (!key_) {
    throw ProtocolViolation("authenticator used before a hash key was drawn");
  }
  pad_offset_ = pool.consumed();
  const std::uint64_t pad = pool.withdraw_word(tag_len_, "wc-pad");
  return wc_tag_with(*key_, pad, bytes, tag_len_);
}

void KeyStore::deposit(std::uint64_t block_id, const BitVector& bits) {
  for (const auto& b : blocks_) {
    if (b.id == block_id) {
      throw ParameterError("duplicate key block id " + std::to_string(block_id));
    }
  }
  blocks_.push_back({block_id, bits, 0});
  stored_ += bits.size();
  generated_ += bits.size();
}

BitVector KeyStore::withdraw_auth(std::size_t n) {
  if (n > stored_) {
    throw KeyDepletionError("key store holds " + std::to_string(stored_) + " bits, " +
                            std::to_string(n) + " requested");
  }
  BitVector out;
  while (out.size() < n) {
    auto& b = blocks_[front_];
    const std::size_t take = std::min(n - out.size(), b.bits.size() - b.used_for_auth);
    out.append(b.bits.slice(b.used_for_auth, take));
    b.used_for_auth += take;
    if (b.used_for_auth == b.bits.size()) {
      ++front_;
    }
  }
  stored_ -= n;
  consumed_ += n;
  auth_.replenish(out);
  return out;
}

BitVector KeyStore::stored_bits() const {
  BitVector out;
  for (const auto& b : blocks_) {
    out.append(b.bits.slice(b.used_for_auth, b.bits.size() - b.used_for_auth));
  }
  return out;
}

std::vector<std::uint8_t> transcript_bytes(const Transcript& transcript) {
  std::vector<std::uint8_t> out;
  for (const auto& e : transcript) {
    out.insert(out.end(), e.frame.begin(), e.frame.end());
  }
  return out;
}

void write_transcript(std::ostream& out, const Transcript& transcript) {
  for (const auto& e : transcript) {
    out.write(reinterpret_cast<const char*>(e.frame.data()),
              static_cast<std::streamsize>(e.frame.size()));
  }
}

void write_transcript_ledger(std::ostream& out, const Transcript& transcript) {
  out << "index,direction,type,seq,hash_key_offset,pad_offset\n";
  for (std::size_t i = 0; i < transcript.size(); ++i) {
    const auto& e = transcript[i];
    const Message m = decode_message(e.frame);
    out << i << ',' << (e.direction == Direction::kAliceToBob ? "alice->bob" : "bob->alice")
        << ',' << message_type_name(m.type) << ',' << m.seq << ',' << e.hash_key_offset << ','
        << e.pad_offset << '\n';
  }
}

std::optional<std::size_t> verify_transcript(const Transcript& transcript,
                                             const BitVector& pool_history, std::size_t tag_len) {
  for (std::size_t i = 0; i < transcript.size(); ++i) {
    const auto& e = transcript[i];
    if (e.hash_key_offset + 64 > pool_history.size() ||
        e.pad_offset + tag_len > pool_history.size()) {
      return i;
    }
    const std::uint64_t key = pool_history.read_word(e.hash_key_offset);
    std::uint64_t pad = pool_history.read_word(e.pad_offset);
    if (tag_len < 64) {
      pad &= (std::uint64_t{1} << tag_len) - 1;
    }
    try {
      decode_message(e.frame, [&](std::span<const std::uint8_t> bytes) {
        return wc_tag_with(key, pad, bytes, tag_len);
      });
    } catch (const FrameError&) {
      return i;
    }
  }
  return std::nullopt;
}

void SessionConfig::validate() const {
  if (block_size < 64) {
    throw ParameterError("session block_size must be at least 64");
  }
  if (!(epsilon_pa > 0.0 && epsilon_pa < 1.0)) {
    throw ParameterError("epsilon_pa must be in (0, 1)");
  }
  eve_bound_by_name(eve_bound);
  if (tag_len == 0 || tag_len > 64) {
    throw ParameterError("tag_len must be in [1, 64]");
  }
  if (bootstrap_key_bits < 64 + tag_len) {
    throw ParameterError("bootstrap key too small for a single message");
  }
  if (!(initial_qber_estimate >= 0.0 && initial_qber_estimate <= 0.5)) {
    throw ParameterError("initial_qber_estimate must be in [0, 0.5]");
  }
  if (cascade_passes == 0) {
    throw ParameterError("cascade_passes must be positive");
  }
  if (!(visibility_floor >= 0.0 && visibility_floor <= 1.0)) {
    throw ParameterError("visibility_floor must be in [0, 1]");
  }
  if (!(block_timeout_s > 0.0)) {
    throw ParameterError("block_timeout_s must be positive");
  }
  if (!(classical_latency_s >= 0.0)) {
    throw ParameterError("classical_latency_s must be non-negative");
  }
}

namespace {

// Thrown inside the block loop; becomes the report's abort reason.
struct SessionAbort {
  std::string reason;
};

class Writer {
 public:
  Writer& u8(std::uint8_t v) {
    bytes.push_back(v);
    return *this;
  }
  Writer& u32(std::uint64_t v) {
    put_be(bytes, v, 4);
    return *this;
  }
  Writer& u64(std::uint64_t v) {
    put_be(bytes, v, 8);
    return *this;
  }
  Writer& f64(double v) { return u64(std::bit_cast<std::uint64_t>(v)); }
  Writer& raw(const std::vector<std::uint8_t>& v) {
    bytes.insert(bytes.end(), v.begin(), v.end());
    return *this;
  }
  Writer& bits(const BitVector& v) {
    u32(v.size());
    return raw(v.to_bytes());
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  Reader(const Message& msg) : msg_(msg) {}
  std::uint64_t u8() { return take(1); }
  std::uint64_t u32() { return take(4); }
  std::uint64_t u64() { return take(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto s = std::span<const std::uint8_t>(msg_.payload).subspan(pos_, n);
    pos_ += n;
    return s;
  }
  BitVector bits() {
    const std::size_t n = u32();
    return BitVector::from_bytes(raw((n + 7) / 8), n);
  }
  void done() const {
    if (pos_ != msg_.payload.size()) {
      fail("trailing payload bytes");
    }
  }

 private:
  void need(std::size_t n) const {
    if (msg_.payload.size() - pos_ < n) {
      fail("payload too short");
    }
  }
  std::uint64_t take(unsigned n) {
    need(n);
    const std::uint64_t v = get_be(msg_.payload, pos_, n);
    pos_ += n;
    return v;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ProtocolViolation(std::string(message_type_name(msg_.type)) + ": " + what);
  }

  const Message& msg_;
  std::size_t pos_ = 0;
};

struct Endpoint {
  KeyStore store;
  SessionAuthenticator auth;
  std::uint64_t send_seq = 0;
  std::uint64_t recv_seq = 0;
};

class Session {
 public:
  Session(const LinkParams& link, const SessionConfig& config, const Seed& seed)
      : link_(link),
        config_(config),
        root_(seed),
        public_(root_.fork("alice-public")),
        bound_(eve_bound_by_name(config.eve_bound)),
        qber_prior_(config.initial_qber_estimate) {
    const BitVector boot = root_.fork("bootstrap-key").next_bits(config.bootstrap_key_bits);
    alice_.store = KeyStore(boot);
    bob_.store = KeyStore(boot);
    alice_.auth = SessionAuthenticator(config.tag_len);
    bob_.auth = SessionAuthenticator(config.tag_len);
  }

  SessionResult run() {
    try {
      align();
      EventDrivenTransmission quantum(link_, root_.fork("quantum"));
      for (std::size_t b = 0; b < config_.n_blocks; ++b) {
        run_block(b, quantum);
      }
    } catch (const SessionAbort& a) {
      report_.abort_reason = a.reason;
    } catch (const KeyDepletionError& e) {
      report_.abort_reason = std::string("key depletion: ") + e.what();
    } catch (const FrameError& e) {
      report_.abort_reason = std::string("authentication failure: ") + e.what();
    } catch (const ProtocolViolation& e) {
      report_.abort_reason = std::string("protocol violation: ") + e.what();
    }
    report_.sim_duration_s = clock_;
    std::size_t secret = 0;
    double qber_sum = 0.0;
    for (const auto& blk : report_.blocks) {
      secret += blk.record.secret_len;
      qber_sum += blk.record.qber;
    }
    report_.average_secret_rate_bps = clock_ > 0.0 ? static_cast<double>(secret) / clock_ : 0.0;
    report_.average_qber = report_.blocks.empty() ? 0.0 : qber_sum / report_.blocks.size();
    return {std::move(report_), std::move(transcript_), std::move(alice_.store),
            std::move(bob_.store)};
  }

 private:
  void align() {
    if (!config_.run_alignment) {
      report_.final_phase_error_rad = link_.interferometer.phase_rad;
      return;
    }
    BitSource src = root_.fork("alignment");
    const AlignmentTrace trace = simulate_alignment(link_, config_.alignment, src);
    const auto& c = config_.alignment;
    report_.alignment_time_s = trace.samples.empty() ? 0.0 : trace.samples.back().time_s;
    if (report_.alignment_time_s == 0.0) {
      report_.alignment_time_s = c.noise_duration_s + c.hold_duration_s + c.lock_duration_s;
    }
    report_.final_phase_error_rad = trace.final_phase_error_rad;
    link_.interferometer.phase_rad = trace.final_phase_error_rad;
    clock_ = report_.alignment_time_s;
  }

  // Sender tags and frames, receiver parses and verifies. Returns the
  // message as the receiver saw it.
  Message send(Direction dir, MessageType type, std::vector<std::uint8_t> payload) {
    Endpoint& from = dir == Direction::kAliceToBob ? alice_ : bob_;
    Endpoint& to = dir == Direction::kAliceToBob ? bob_ : alice_;
    // Both reserves drain in step, so both are topped up at the same message.
    if (alice_.store.auth().available() < config_.tag_len) {
      refill(alice_);
      refill(bob_);
    }
    Message msg{type, from.send_seq++, std::move(payload), 0};
    const auto body = authenticated_bytes(msg);
    msg.tag = from.auth.tag(from.store.auth(), body);
    TranscriptEntry entry{dir, encode_message(msg), from.auth.key_offset(),
                          from.auth.last_pad_offset()};
    std::vector<std::uint8_t> wire = entry.frame;
    transcript_.push_back(std::move(entry));
    if (config_.tap) {
      config_.tap(transcript_.size() - 1, wire);
    }
    ++block_messages_;
    clock_ += config_.classical_latency_s;
    Message got = decode_message(wire, [&](std::span<const std::uint8_t> bytes) {
      return to.auth.tag(to.store.auth(), bytes);
    });
    if (got.seq != to.recv_seq) {
      throw ProtocolViolation("sequence number " + std::to_string(got.seq) + ", expected " +
                              std::to_string(to.recv_seq));
    }
    ++to.recv_seq;
    if (got.type != type && got.type != MessageType::kAbort) {
      throw ProtocolViolation(std::string("expected ") + message_type_name(type) + ", got " +
                              message_type_name(got.type));
    }
    if (got.type == MessageType::kAbort) {
      throw SessionAbort{"peer abort: " +
                         std::string(got.payload.begin(), got.payload.end())};
    }
    return got;
  }

  // Best effort; the abort reason is recorded either way.
  [[noreturn]] void abort_from(Direction dir, const std::string& reason) {
    try {
      send(dir, MessageType::kAbort, std::vector<std::uint8_t>(reason.begin(), reason.end()));
    } catch (const SessionAbort&) {
    } catch (const Error&) {
    }
    throw SessionAbort{reason};
  }

  // Chunk loop: Bob announces, Alice answers with decoy flags, both append
  // to their pending raw keys until a block is full.
  void accumulate(EventDrivenTransmission& quantum, BlockReport& blk, CoherenceCounts& counts,
                  double& acquisition_s) {
    const double bit_rate = link_.source.bit_rate_hz();
    // Zero on a dead link; the loop then runs into the timeout.
    const double per_slot =
        (1.0 - link_.protocol.decoy_fraction) * analytic_rates(link_).p_sift_per_data_slot;
    const auto timeout_slots =
        static_cast<std::uint64_t>(std::ceil(config_.block_timeout_s * bit_rate));
    std::uint64_t used = 0;
    while (alice_pending_.size() < config_.block_size) {
      if (used >= timeout_slots) {
        abort_from(Direction::kBobToAlice,
                   "no detections: block not filled within " +
                       std::to_string(config_.block_timeout_s) + " s");
      }
      const double needed = static_cast<double>(config_.block_size - alice_pending_.size());
      std::uint64_t chunk = timeout_slots - used;
      if (per_slot > 0.0) {
        const double want = std::ceil(needed / per_slot * 1.02) + 1024.0;
        chunk = std::min<std::uint64_t>(chunk, static_cast<std::uint64_t>(want));
      }
      TransmissionChunk tx = quantum.next(chunk);
      used += chunk;
      blk.slots += chunk;
      clock_ += static_cast<double>(chunk) / bit_rate;
      acquisition_s += static_cast<double>(chunk) / bit_rate;

      // Bob: clicked slots and monitor clicks are public.
      const BobDecoded bob = bob_decode(tx.record);
      Writer w;
      w.u64(tx.record.first_slot).u64(tx.record.n_slots).u32(bob.slots.size());
      for (auto s : bob.slots) {
        w.u64(s);
      }
      w.u32(tx.record.monitor_clicks.size());
      for (const auto& c : tx.record.monitor_clicks) {
        w.u64(c.pulse).u8(static_cast<std::uint8_t>(c.port));
      }
      const Message announce = send(Direction::kBobToAlice, MessageType::kSiftAnnounce, w.bytes);

      // Alice.
      Reader r(announce);
      const std::uint64_t first = r.u64();
      const std::uint64_t n = r.u64();
      if (first != tx.frame.first_slot() || n != tx.frame.n_slots()) {
        throw ProtocolViolation("SIFT_ANNOUNCE for the wrong frame");
      }
      std::vector<std::uint64_t> slots(r.u32());
      for (auto& s : slots) {
        s = r.u64();
      }
      std::vector<MonitorClick> clicks(r.u32());
      for (auto& c : clicks) {
        c.pulse = r.u64();
        const auto port = r.u8();
        if (port > 1) {
          throw ProtocolViolation("SIFT_ANNOUNCE: bad monitor port");
        }
        c.port = static_cast<Port>(port);
      }
      r.done();
      const std::vector<bool> decoy = decoy_flags(tx.frame, slots);
      counts += coherence_counts(clicks, tx.frame);
      BitVector flags(decoy.size());
      for (std::size_t i = 0; i < decoy.size(); ++i) {
        if (decoy[i]) {
          flags.set(i, true);
        } else {
          alice_pending_.push_back(tx.frame.kind(slots[i]) == SlotKind::kData1);
        }
      }
      const Message report =
          send(Direction::kAliceToBob, MessageType::kDecoyReport, Writer().bits(flags).bytes);

      // Bob.
      Reader rr(report);
      const BitVector got = rr.bits();
      rr.done();
      if (got.size() != bob.slots.size()) {
        throw ProtocolViolation("DECOY_REPORT length mismatch");
      }
      for (std::size_t i = 0; i < got.size(); ++i) {
        if (!got.get(i)) {
          bob_pending_.push_back(bob.bits.get(i));
        }
      }
    }
  }

  class Channel : public ParityChannel {
   public:
    Channel(Session& s, const CascadeResponder& alice) : s_(s), alice_(alice) {}
    std::vector<bool> ask(std::span<const ParityQuery> queries) override {
      Writer w;
      w.u32(queries.size());
      for (const auto& q : queries) {
        w.u8(static_cast<std::uint8_t>(q.pass)).u32(q.lo).u32(q.hi);
      }
      const Message req = s_.send(Direction::kBobToAlice, MessageType::kParityRequest, w.bytes);
      Reader r(req);
      std::vector<ParityQuery> got(r.u32());
      for (auto& q : got) {
        q.pass = static_cast<std::uint32_t>(r.u8());
        q.lo = static_cast<std::uint32_t>(r.u32());
        q.hi = static_cast<std::uint32_t>(r.u32());
      }
      r.done();
      const std::vector<bool> answers = alice_.answer(got);
      BitVector packed(answers.size());
      for (std::size_t i = 0; i < answers.size(); ++i) {
        packed.set(i, answers[i]);
      }
      const Message resp = s_.send(Direction::kAliceToBob, MessageType::kParityResponse,
                                   Writer().bits(packed).bytes);
      Reader rr(resp);
      const BitVector bits = rr.bits();
      rr.done();
      std::vector<bool> out(bits.size());
      for (std::size_t i = 0; i < bits.size(); ++i) {
        out[i] = bits.get(i);
      }
      return out;
    }

   private:
    Session& s_;
    const CascadeResponder& alice_;
  };

  void run_block(std::size_t b, EventDrivenTransmission& quantum) {
    BlockReport blk;
    blk.block_id = b;
    block_messages_ = 0;
    const std::size_t auth_before = alice_.store.auth().consumed();
    alice_.auth.rekey(alice_.store.auth());
    bob_.auth.rekey(bob_.store.auth());

    CoherenceCounts counts;
    double acquisition_s = 0.0;
    accumulate(quantum, blk, counts, acquisition_s);

    const std::size_t n = config_.block_size;
    const BitVector alice_key = alice_pending_.slice(0, n);
    const BitVector bob_key = bob_pending_.slice(0, n);
    alice_pending_ = alice_pending_.slice(n, alice_pending_.size() - n);
    bob_pending_ = bob_pending_.slice(n, bob_pending_.size() - n);

    // Visibility: Alice classified the monitor clicks against her frame.
    Writer vw;
    vw.u64(counts.destructive_decoy)
        .u64(counts.constructive_decoy)
        .u64(counts.destructive_boundary)
        .u64(counts.constructive_boundary)
        .f64(acquisition_s);
    const Message vmsg = send(Direction::kAliceToBob, MessageType::kVisibilityReport, vw.bytes);
    Reader vr(vmsg);
    CoherenceCounts bob_counts;
    bob_counts.destructive_decoy = vr.u64();
    bob_counts.constructive_decoy = vr.u64();
    bob_counts.destructive_boundary = vr.u64();
    bob_counts.constructive_boundary = vr.u64();
    const double bob_acq = vr.f64();
    vr.done();
    double v_used = config_.visibility_floor;
    blk.measured_visibility = std::numeric_limits<double>::quiet_NaN();
    try {
      const VisibilityEstimate est =
          estimate_visibility(bob_counts, bob_acq, config_.visibility_policy);
      blk.measured_visibility = est.value;
      blk.visibility_reliable = est.reliable;
      if (est.reliable) {
        v_used = est.value;
      }
    } catch (const InsufficientStatisticsError&) {
      blk.visibility_reliable = false;
    }
    if (!blk.visibility_reliable && config_.visibility_fallback == VisibilityFallback::kAbort) {
      abort_from(Direction::kBobToAlice, "visibility unreliable");
    }

    // Reconciliation.
    const Seed shuffle = public_.fork("shuffle-" + std::to_string(b)).seed();
    Writer sw;
    sw.raw(std::vector<std::uint8_t>(shuffle.begin(), shuffle.end()))
        .u8(static_cast<std::uint8_t>(config_.cascade_passes));
    const Message smsg = send(Direction::kAliceToBob, MessageType::kShuffleSeed, sw.bytes);
    Reader sr(smsg);
    Seed bob_shuffle{};
    const auto seed_bytes = sr.raw(bob_shuffle.size());
    std::copy(seed_bytes.begin(), seed_bytes.end(), bob_shuffle.begin());
    const std::size_t passes = sr.u8();
    sr.done();

    const CascadeResponder responder(alice_key, passes, shuffle);
    Channel channel(*this, responder);
    CascadeConfig cfg;
    cfg.num_passes = passes;
    cfg.shuffle_seed = bob_shuffle;
    const double prior = std::max(qber_prior_, 0.001);
    CascadeResult cas = cascade_reconcile(bob_key, prior, cfg, channel);
    if (cas.leaked_bits != responder.answered()) {
      throw ProtocolViolation("parity accounting differs between the endpoints");
    }
    blk.cascade_exchanges = cas.exchanges;
    const std::size_t bob_errors = bob_key.hamming_distance(cas.corrected_key);

    // Confirmation: 64-bit Toeplitz hash under a fresh public seed.
    const std::size_t confirm = 64;
    const BitVector cseed = public_.next_bits(ToeplitzSeed::seed_length(n, confirm));
    const BitVector alice_hash = toeplitz_hash(cseed, alice_key, confirm);
    Writer cw;
    cw.bits(cseed).bits(alice_hash);
    const Message cmsg = send(Direction::kAliceToBob, MessageType::kKeyConfirm, cw.bytes);
    Reader cr(cmsg);
    const BitVector bob_cseed = cr.bits();
    const BitVector expect = cr.bits();
    cr.done();
    if (bob_cseed.size() != cseed.size() || expect.size() != confirm) {
      throw ProtocolViolation("KEY_CONFIRM has the wrong sizes");
    }
    const bool match = toeplitz_hash(bob_cseed, cas.corrected_key, confirm) == expect;
    const Message ack = send(Direction::kBobToAlice, MessageType::kKeyConfirm,
                             Writer().u8(match ? 1 : 0).u64(bob_errors).bytes);
    Reader ar(ack);
    const bool alice_sees_match = ar.u8() == 1;
    const std::size_t errors = ar.u64();
    ar.done();
    blk.confirmed = alice_sees_match;
    blk.corrections = errors;

    auto& rec = blk.record;
    rec.n_sifted = n;
    rec.qber = static_cast<double>(errors) / static_cast<double>(n);
    rec.leaked_bits = cas.leaked_bits;
    rec.confirm_bits = confirm;
    rec.visibility = v_used;
    rec.eve_bound_per_bit = bound_(v_used);
    rec.epsilon_pa = config_.epsilon_pa;
    rec.secret_len = alice_sees_match ? compute_secret_length(n, rec.leaked_bits + confirm, v_used,
                                                              config_.epsilon_pa, bound_)
                                      : 0;
    qber_prior_ = rec.qber;

    if (alice_sees_match) {
      // Privacy amplification.
      const std::size_t m = rec.secret_len;
      const BitVector pseed =
          m > 0 ? public_.next_bits(ToeplitzSeed::seed_length(n, m)) : BitVector();
      Writer pw;
      pw.u64(m).bits(pseed);
      const Message pmsg = send(Direction::kAliceToBob, MessageType::kPaSeed, pw.bytes);
      Reader pr(pmsg);
      const std::size_t bob_m = pr.u64();
      const BitVector bob_pseed = pr.bits();
      pr.done();
      const std::size_t bob_expect = compute_secret_length(n, cas.leaked_bits + confirm, v_used,
                                                           config_.epsilon_pa, bound_);
      if (bob_m != bob_expect || bob_pseed.size() != ToeplitzSeed::seed_length(n, bob_m) ||
          (bob_m == 0 && !bob_pseed.empty())) {
        throw ProtocolViolation("PA_SEED disagrees with Bob's secret length");
      }
      if (m > 0) {
        alice_.store.deposit(b, toeplitz_hash(pseed, alice_key, m));
        bob_.store.deposit(b, toeplitz_hash(bob_pseed, cas.corrected_key, bob_m));
      }
    }

    blk.messages = block_messages_;
    blk.auth_bits = alice_.store.auth().consumed() - auth_before;
    refill(alice_);
    refill(bob_);
    blk.sim_time_s = clock_;
    report_.visibility_series.emplace_back(clock_, v_used);
    report_.blocks.push_back(std::move(blk));
  }

  // Tops the auth reserve back up to the bootstrap size from stored key.
  // Only confirmed blocks are ever in the store.
  void refill(Endpoint& e) {
    const std::size_t have = e.store.auth().available();
    if (have >= config_.bootstrap_key_bits) {
      return;
    }
    const std::size_t take = std::min(config_.bootstrap_key_bits - have, e.store.available());
    if (take > 0) {
      e.store.withdraw_auth(take);
    }
  }

  LinkParams link_;
  const SessionConfig& config_;
  BitSource root_;
  BitSource public_;
  EveBound bound_;
  Endpoint alice_;
  Endpoint bob_;
  BitVector alice_pending_;
  BitVector bob_pending_;
  double qber_prior_ = 0.0;
  double clock_ = 0.0;
  std::size_t block_messages_ = 0;
  Transcript transcript_;
  SessionReport report_;
};

}  // namespace

SessionResult run_session(const LinkParams& link, const SessionConfig& config, const Seed& seed) {
  link.validate();
  config.validate();
  Session s(link, config, seed);
  return s.run();
}

void SessionReport::write_csv(std::ostream& out) const {
  out << "block_id,n_sifted,qber,visibility,leaked_bits,secret_len,sim_time_s\n";
  out << std::setprecision(10);
  for (const auto& b : blocks) {
    out << b.block_id << ',' << b.record.n_sifted << ',' << b.record.qber << ','
        << b.record.visibility << ',' << b.record.leaked_bits << ',' << b.record.secret_len << ','
        << b.sim_time_s << '\n';
  }
}

void SessionReport::write_summary(std::ostream& out) const {
  out << std::setprecision(6);
  out << "blocks completed:      " << blocks.size() << '\n';
  out << "alignment time:        " << alignment_time_s << " s (phase error "
      << final_phase_error_rad << " rad)\n";
  out << "simulated duration:    " << sim_duration_s << " s\n";
  out << "average QBER:          " << 100.0 * average_qber << " %\n";
  out << "average secret rate:   " << average_secret_rate_bps << " bit/s\n";
  for (const auto& b : blocks) {
    out << "block " << b.block_id << ": n=" << b.record.n_sifted << " qber=" << 100.0 * b.record.qber
        << "% V=" << b.record.visibility << (b.visibility_reliable ? "" : " (floor)")
        << " leaked=" << b.record.leaked_bits << " secret=" << b.record.secret_len
        << (b.confirmed ? "" : " UNCONFIRMED") << " auth_bits=" << b.auth_bits << '\n';
  }
  if (!blocks.empty()) {
    double mean = 0.0;
    for (const auto& b : blocks) {
      mean += static_cast<double>(b.record.secret_len);
    }
    mean /= static_cast<double>(blocks.size());
    out << "secret bits per block: " << mean
        << " (default Eve bound); reference figure: approx. 7000 per 2^15-bit block\n";
  }
  if (aborted()) {
    out << "ABORTED: " << abort_reason << '\n';
  }
}

}  // namespace cowqkd
