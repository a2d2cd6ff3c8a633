// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cowqkd/authentication.hpp"
#include "cowqkd/bit_vector.hpp"
#include "cowqkd/cow_protocol.hpp"
#include "cowqkd/distillation.hpp"
#include "cowqkd/photonic_model.hpp"
#include "cowqkd/randomness.hpp"

namespace cowqkd {

enum class MessageType : std::uint8_t {
  kSiftAnnounce = 1,
  kDecoyReport = 2,
  kVisibilityReport = 3,
  kParityRequest = 4,
  kParityResponse = 5,
  kShuffleSeed = 6,
  kPaSeed = 7,
  kKeyConfirm = 8,
  kAbort = 9,
};

const char* message_type_name(MessageType type) noexcept;

struct Message {
  MessageType type = MessageType::kAbort;
  std::uint64_t seq = 0;
  std::vector<std::uint8_t> payload;
  std::uint64_t tag = 0;
  bool operator==(const Message&) const = default;
};

inline constexpr std::size_t kFrameHeaderBytes = 4 + 1 + 8;
inline constexpr std::size_t kFrameTagBytes = 8;

/// Frame: u32 payload length | u8 type | u64 seq | payload | u64 tag, all
/// big-endian. The tag covers every byte before it.
std::vector<std::uint8_t> encode_message(const Message& msg);
/// The bytes the tag is computed over (the frame minus its tag).
std::vector<std::uint8_t> authenticated_bytes(const Message& msg);

/// Parses exactly one frame. Throws FrameError on a short buffer, a length
/// that disagrees with the buffer, an unknown type, or trailing bytes.
Message decode_message(std::span<const std::uint8_t> frame);
/// Same, then checks the tag against `expected_tag(authenticated bytes)`;
/// a mismatch is a FrameError positioned at the tag.
Message decode_message(std::span<const std::uint8_t> frame,
                       const std::function<std::uint64_t(std::span<const std::uint8_t>)>& expected_tag);

/// Splits concatenated frames. Errors carry absolute byte positions.
std::vector<Message> decode_frames(std::span<const std::uint8_t> bytes);

/// Wegman-Carter tagging for a session. One 64-bit hash key is drawn per
/// epoch (a distilled block) and every message spends a fresh tag_len-bit
/// pad, so the per-message cost is the pad alone.
class SessionAuthenticator {
 public:
  explicit SessionAuthenticator(std::size_t tag_len = 64) : tag_len_(tag_len) {}

  /// Draws a new hash key from the pool. Throws KeyDepletionError.
  void rekey(AuthKeyPool& pool);
  /// Spends one pad. Throws KeyDepletionError, or ProtocolViolation before
  /// the first rekey.
  std::uint64_t tag(AuthKeyPool& pool, std::span<const std::uint8_t> bytes);

  std::size_t tag_len() const noexcept { return tag_len_; }
  std::size_t key_offset() const noexcept { return key_offset_; }
  std::size_t last_pad_offset() const noexcept { return pad_offset_; }

 private:
  std::size_t tag_len_;
  std::optional<std::uint64_t> key_;
  std::size_t key_offset_ = 0;
  std::size_t pad_offset_ = 0;
};

/// Confirmed secret blocks plus the authentication reserve refilled from
/// them. Conservation: total_generated == stored + total_consumed.
class KeyStore {
 public:
  KeyStore() = default;
  explicit KeyStore(BitVector bootstrap_auth) : auth_(std::move(bootstrap_auth)) {}

  /// Throws ParameterError for a duplicate block id.
  void deposit(std::uint64_t block_id, const BitVector& bits);
  /// Moves the oldest stored bits into the auth reserve and returns them.
  /// Throws KeyDepletionError if fewer than n bits are stored.
  BitVector withdraw_auth(std::size_t n);

  std::size_t stored() const noexcept { return stored_; }
  std::size_t available() const noexcept { return stored_; }
  std::size_t total_generated() const noexcept { return generated_; }
  std::size_t total_consumed() const noexcept { return consumed_; }

  /// Blocks as deposited, with how many leading bits went to authentication.
  struct Block {
    std::uint64_t id;
    BitVector bits;
    std::size_t used_for_auth = 0;
  };
  const std::vector<Block>& blocks() const noexcept { return blocks_; }
  /// Concatenation of the bits still stored.
  BitVector stored_bits() const;

  AuthKeyPool& auth() noexcept { return auth_; }
  const AuthKeyPool& auth() const noexcept { return auth_; }

 private:
  std::vector<Block> blocks_;
  std::size_t front_ = 0;  // first block with unused bits
  std::size_t stored_ = 0;
  std::size_t generated_ = 0;
  std::size_t consumed_ = 0;
  AuthKeyPool auth_;
};

enum class Direction : std::uint8_t { kAliceToBob = 0, kBobToAlice = 1 };

struct TranscriptEntry {
  Direction direction;
  std::vector<std::uint8_t> frame;
  std::size_t hash_key_offset;  // bit offsets into the auth pool history
  std::size_t pad_offset;
};

using Transcript = std::vector<TranscriptEntry>;

/// Concatenated frames, as written to the transcript file.
std::vector<std::uint8_t> transcript_bytes(const Transcript& transcript);
void write_transcript(std::ostream& out, const Transcript& transcript);
/// Columns: index, direction, type, seq, hash_key_offset, pad_offset.
void write_transcript_ledger(std::ostream& out, const Transcript& transcript);

/// Re-verifies every frame from the auth pool history. Returns the index of
/// the first frame that fails to parse or verify, or nullopt.
std::optional<std::size_t> verify_transcript(const Transcript& transcript,
                                             const BitVector& pool_history,
                                             std::size_t tag_len = 64);

enum class VisibilityFallback : std::uint8_t { kFloor, kAbort };

struct SessionConfig {
  std::size_t block_size = 32768;
  std::size_t n_blocks = 3;
  double epsilon_pa = 1e-9;
  std::string eve_bound = "entropy";
  std::size_t bootstrap_key_bits = 10000;
  std::size_t tag_len = 64;
  /// QBER prior for the first block's Cascade; later blocks use the last
  /// measured QBER.
  double initial_qber_estimate = 0.02;
  std::size_t cascade_passes = 4;
  VisibilityPolicy visibility_policy;
  VisibilityFallback visibility_fallback = VisibilityFallback::kFloor;
  double visibility_floor = 0.92;
  /// Abort with "no detections" if a block is not filled in this much
  /// simulated time.
  double block_timeout_s = 3600.0;
  /// One-way classical latency, charged per message.
  double classical_latency_s = 0.0;
  bool run_alignment = true;
  AlignmentController alignment{.lock_duration_s = 30.0};
  /// Test hook: sees (and may modify) every frame before delivery.
  std::function<void(std::size_t index, std::vector<std::uint8_t>& frame)> tap;

  void validate() const;
};

struct BlockReport {
  std::uint64_t block_id = 0;
  DistillationRecord record;
  double measured_visibility = 0.0;  // NaN when there were no coherent counts
  bool visibility_reliable = false;
  bool confirmed = false;
  std::uint64_t slots = 0;
  double sim_time_s = 0.0;  // simulated clock when the block was stored
  std::size_t corrections = 0;
  std::size_t cascade_exchanges = 0;
  std::size_t messages = 0;
  std::size_t auth_bits = 0;  // pool bits spent on this block's messages
};

struct SessionReport {
  std::vector<BlockReport> blocks;
  double alignment_time_s = 0.0;
  double final_phase_error_rad = 0.0;
  double sim_duration_s = 0.0;
  double average_secret_rate_bps = 0.0;  // sum of secret_len / sim_duration_s
  double average_qber = 0.0;
  /// (simulated time, visibility used for the block).
  std::vector<std::pair<double, double>> visibility_series;
  std::string abort_reason;  // empty if the session completed

  bool aborted() const noexcept { return !abort_reason.empty(); }

  /// Columns: block_id, n_sifted, qber, visibility, leaked_bits, secret_len,
  /// sim_time_s.
  void write_csv(std::ostream& out) const;
  void write_summary(std::ostream& out) const;
};

struct SessionResult {
  SessionReport report;
  Transcript transcript;
  KeyStore alice_store;
  KeyStore bob_store;
};

/// Alignment, then per block: sift until block_size bits, visibility report,
/// Cascade, key confirmation, privacy amplification, deposit. Never throws
/// for protocol-level failures; they end up in report.abort_reason. Invalid
/// parameters throw ParameterError.
SessionResult run_session(const LinkParams& link, const SessionConfig& config, const Seed& seed);

}  // namespace cowqkd
