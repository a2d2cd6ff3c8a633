// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "cowqkd/bit_vector.hpp"
#include "cowqkd/photonic_model.hpp"
#include "cowqkd/randomness.hpp"

namespace cowqkd {

/// What Alice puts in one bit slot (two pulse positions).
///   Data0 -> (mu, 0)   Data1 -> (0, mu)   Decoy -> (mu, mu)
enum class SlotKind : std::uint8_t { kData0 = 0, kData1 = 1, kDecoy = 2 };

constexpr bool pulse_nonempty(SlotKind kind, unsigned half) noexcept {
  switch (kind) {
    case SlotKind::kData0:
      return half == 0;
    case SlotKind::kData1:
      return half == 1;
    case SlotKind::kDecoy:
      return true;
  }
  return false;
}

/// Alice's transmitted sequence over slots [first_slot, first_slot + n_slots).
///
/// A dense frame stores every slot. A sparse frame, produced by the
/// event-driven simulator, stores only the slots that were needed to resolve
/// detection events (plus their left neighbours); every other slot was drawn
/// from the same distribution but never materialised.
class FrameSchedule {
 public:
  FrameSchedule() = default;
  static FrameSchedule dense(std::vector<SlotKind> kinds, std::uint64_t first_slot = 0);
  static FrameSchedule sparse(std::uint64_t first_slot, std::uint64_t n_slots);

  std::uint64_t first_slot() const noexcept { return first_slot_; }
  std::uint64_t n_slots() const noexcept { return n_slots_; }
  std::uint64_t end_slot() const noexcept { return first_slot_ + n_slots_; }
  bool is_dense() const noexcept { return indices_.empty() && !sparse_; }

  bool contains(std::uint64_t slot) const noexcept;
  /// Throws ProtocolViolation if the slot is out of range or not materialised.
  SlotKind kind(std::uint64_t slot) const;
  bool pulse_nonempty_at(std::uint64_t pulse) const { return pulse_nonempty(kind(pulse / 2), pulse % 2); }

  /// Sparse frames only; slots must be appended in increasing order.
  void add(std::uint64_t slot, SlotKind kind);

  std::size_t materialized() const noexcept { return kinds_.size(); }
  /// (slot, kind) of the i-th stored entry.
  std::pair<std::uint64_t, SlotKind> entry(std::size_t i) const noexcept {
    return {is_dense() ? first_slot_ + i : indices_[i], kinds_[i]};
  }

  /// Per-pulse intensity pattern (1 = mu, 0 = empty), length 2 * n_slots.
  /// Dense frames only.
  std::vector<std::uint8_t> pulse_pattern() const;

 private:
  std::uint64_t first_slot_ = 0;
  std::uint64_t n_slots_ = 0;
  bool sparse_ = false;
  std::vector<std::uint64_t> indices_;
  std::vector<SlotKind> kinds_;
};

/// Each slot independently Decoy with probability `decoy_fraction`, else a
/// uniform data bit. Consumes 64 bits per slot plus 1 per data slot.
FrameSchedule generate_frame(BitSource& source, std::uint64_t n_slots, double decoy_fraction);

enum class Half : std::uint8_t { kFirst = 0, kSecond = 1 };
enum class Port : std::uint8_t { kDestructive = 0, kConstructive = 1 };

struct DataClick {
  std::uint64_t slot;
  Half half;
  bool operator==(const DataClick&) const = default;
};

/// Click on the monitor interferometer in the time bin where pulse
/// `pulse - 1` (delayed arm) overlaps pulse `pulse`.
struct MonitorClick {
  std::uint64_t pulse;
  Port port;
  bool operator==(const MonitorClick&) const = default;
};

/// Bob's time-slotted clicks. Double clicks on the data line are dropped and
/// only counted. In event-driven records `routed_to_monitor` lists just the
/// routed pulses that produced a monitor event.
struct DetectionRecord {
  std::uint64_t first_slot = 0;
  std::uint64_t n_slots = 0;
  std::vector<DataClick> data_clicks;
  std::vector<MonitorClick> monitor_clicks;
  std::vector<std::uint64_t> routed_to_monitor;
  std::uint64_t double_clicks = 0;
};

/// Per-pulse event probabilities shared by both simulators.
struct PulseModel {
  double monitor_fraction = 0.0;
  double data_full = 0.0;   // data click, non-empty pulse (dark included)
  double data_empty = 0.0;  // data click, empty pulse (optical error + dark)
  /// monitor[prev_nonempty + cur_nonempty][port]
  double monitor[3][2] = {};

  static PulseModel from_link(const LinkParams& link);
};

/// Plays every pulse of a dense frame through the link.
DetectionRecord simulate_transmission(const FrameSchedule& frame, const LinkParams& link,
                                      BitSource& source);

struct TransmissionChunk {
  FrameSchedule frame;
  DetectionRecord record;
};

/// Event-driven transmission for long links. Candidate pulses are drawn with
/// geometric gaps at the largest per-pulse event probability and thinned to
/// the true one, so empty stretches cost nothing. Slot contents are sampled
/// only where an event needs them. Same per-pulse model as
/// simulate_transmission; statistically equivalent, not draw-for-draw.
class EventDrivenTransmission {
 public:
  EventDrivenTransmission(const LinkParams& link, BitSource source);

  /// Frame and clicks for the next `n_slots` slots.
  TransmissionChunk next(std::uint64_t n_slots);
  std::uint64_t slots_done() const noexcept { return next_slot_; }
  double event_probability_bound() const noexcept { return lambda_; }

 private:
  SlotKind materialize(std::uint64_t slot, FrameSchedule& frame);
  SlotKind draw_kind();

  PulseModel model_;
  double decoy_fraction_;
  double lambda_ = 0.0;
  double accept_[3][2] = {};  // total event prob by (pair class, cur nonempty)
  BitSource source_;
  std::uint64_t next_slot_ = 0;
  std::uint64_t next_pulse_ = 0;
  // Two most recently materialised slots, kept for neighbour lookups.
  std::uint64_t cache_slot_[2] = {~std::uint64_t{0}, ~std::uint64_t{0}};
  SlotKind cache_kind_[2] = {SlotKind::kData0, SlotKind::kData0};
};

/// Bob's side after decoding: public slot list, private bits (first = 0).
struct BobDecoded {
  std::vector<std::uint64_t> slots;
  BitVector bits;
};

BobDecoded bob_decode(const DetectionRecord& record);

/// Monitor counts on coherent pairs (both pulses non-empty), split by where
/// the pair sits: inside a decoy or across a bit boundary.
struct CoherenceCounts {
  std::uint64_t destructive_decoy = 0;
  std::uint64_t constructive_decoy = 0;
  std::uint64_t destructive_boundary = 0;
  std::uint64_t constructive_boundary = 0;

  std::uint64_t destructive() const noexcept { return destructive_decoy + destructive_boundary; }
  std::uint64_t constructive() const noexcept { return constructive_decoy + constructive_boundary; }
  std::uint64_t total() const noexcept { return destructive() + constructive(); }
  CoherenceCounts& operator+=(const CoherenceCounts& o) noexcept;
};

/// Classifies monitor clicks against Alice's frame. Clicks whose pair is not
/// coherent, or whose slots the frame does not hold, are ignored.
CoherenceCounts coherence_counts(std::span<const MonitorClick> clicks, const FrameSchedule& frame);

struct SiftedBlock {
  BitVector alice_bits;
  BitVector bob_bits;
  std::vector<std::uint64_t> slot_indices;
  std::uint64_t decoy_detection_count = 0;
  CoherenceCounts coherence;
};

/// Alice: for each announced slot, whether it was a decoy. Throws
/// ProtocolViolation for slots outside the frame.
std::vector<bool> decoy_flags(const FrameSchedule& frame, std::span<const std::uint64_t> slots);

SiftedBlock sift(const FrameSchedule& frame, const BobDecoded& decoded);
/// Decodes the record, sifts, and fills the coherence statistics.
SiftedBlock sift(const FrameSchedule& frame, const DetectionRecord& record);

struct VisibilityPolicy {
  std::uint64_t min_counts = 100;   // coherent-pair counts
  double min_rate_hz = 100.0;       // coherent-pair count rate
};

struct VisibilityEstimate {
  double value = 0.0;
  std::uint64_t destructive = 0;
  std::uint64_t constructive = 0;
  double count_rate_hz = 0.0;
  bool reliable = false;
};

/// (C - D) / (C + D) on coherent pairs, floored at 0. `duration_s` is the
/// acquisition time used for the rate criterion. Throws
/// InsufficientStatisticsError when there are no coherent counts at all.
VisibilityEstimate estimate_visibility(const CoherenceCounts& counts, double duration_s,
                                       const VisibilityPolicy& policy = {});
VisibilityEstimate estimate_visibility(const DetectionRecord& record, const FrameSchedule& frame,
                                       const LinkParams& link, const VisibilityPolicy& policy = {});

enum class AlignmentStage : std::uint8_t { kNoise = 0, kScan = 1, kHoldMax = 2, kLockedMin = 3 };
const char* stage_name(AlignmentStage stage) noexcept;

/// Wavelength-scan and lock-to-minimum controller. Offsets are in laser
/// tuning steps; one step moves the interferometer phase by
/// `InterferometerParams::phase_per_step_rad`.
struct AlignmentController {
  std::int64_t scan_range_steps = 280;
  std::int64_t scan_step = 1;
  double scan_dwell_s = 0.1;
  double settle_time_s = 0.5;
  /// Phase correction per tick = -gain * (estimated phase error). The error
  /// comes from the dithered counts and the fringe amplitude fitted in the scan.
  double gain = 0.6;
  std::int64_t dither_steps = 2;
  double noise_duration_s = 10.0;
  double hold_duration_s = 30.0;
  double lock_duration_s = 600.0;
  double visibility_window_s = 10.0;
};

struct AlignmentSample {
  double time_s;
  AlignmentStage stage;
  std::int64_t laser_offset_step;
  double count_rate_hz;
  double true_phase_rad;  // simulation ground truth, not exported
};

struct AlignmentTrace {
  std::vector<AlignmentSample> samples;
  double max_rate_hz = 0.0;
  double min_rate_hz = 0.0;
  double visibility = 0.0;
  /// (window end time, visibility) over the locked stage.
  std::vector<std::pair<double, double>> visibility_series;
  double min_window_visibility = 0.0;
  double final_phase_error_rad = 0.0;
  /// Expected destructive-port rate model: pair_rate * (base (1 - V cos phi)/2 + dark).
  double coherent_pair_rate_hz = 0.0;

  /// Columns: time_s, stage, laser_offset_step, count_rate_hz.
  void write_csv(std::ostream& out) const;
};

/// Rate at the destructive monitor port, post-selected on coherent pairs, for
/// true interferometer phase `phase_rad` (laser on).
double monitor_rate_hz(const LinkParams& link, double phase_rad);
double coherent_pair_rate_hz(const LinkParams& link);

AlignmentTrace simulate_alignment(const LinkParams& link, const AlignmentController& controller,
                                  BitSource& source);

}  // namespace cowqkd
