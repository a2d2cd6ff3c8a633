// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "cowqkd/cow_protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <string>

#include "cowqkd/errors.hpp"

namespace cowqkd {

namespace {

double either(double a, double b) { return 1.0 - (1.0 - a) * (1.0 - b); }

std::string slot_error(std::uint64_t slot) {
  return "slot " + std::to_string(slot) + " is not in the frame";
}

}  // namespace

// ---------------------------------------------------------------- frames

FrameSchedule FrameSchedule::dense(std::vector<SlotKind> kinds, std::uint64_t first_slot) {
  FrameSchedule f;
  f.first_slot_ = first_slot;
  f.n_slots_ = kinds.size();
  f.kinds_ = std::move(kinds);
  return f;
}

FrameSchedule FrameSchedule::sparse(std::uint64_t first_slot, std::uint64_t n_slots) {
  FrameSchedule f;
  f.first_slot_ = first_slot;
  f.n_slots_ = n_slots;
  f.sparse_ = true;
  return f;
}

bool FrameSchedule::contains(std::uint64_t slot) const noexcept {
  if (is_dense()) {
    return slot >= first_slot_ && slot < end_slot();
  }
  return std::binary_search(indices_.begin(), indices_.end(), slot);
}

SlotKind FrameSchedule::kind(std::uint64_t slot) const {
  if (is_dense()) {
    if (slot < first_slot_ || slot >= end_slot()) {
      throw ProtocolViolation(slot_error(slot));
    }
    return kinds_[slot - first_slot_];
  }
  const auto it = std::lower_bound(indices_.begin(), indices_.end(), slot);
  if (it == indices_.end() || *it != slot) {
    throw ProtocolViolation(slot_error(slot));
  }
  return kinds_[static_cast<std::size_t>(it - indices_.begin())];
}

void FrameSchedule::add(std::uint64_t slot, SlotKind kind) {
  if (!sparse_) {
    throw ParameterError("FrameSchedule::add on a dense frame");
  }
  if (!indices_.empty() && slot <= indices_.back()) {
    if (slot == indices_.back()) {
      return;
    }
    throw ParameterError("FrameSchedule::add: slots must increase");
  }
  indices_.push_back(slot);
  kinds_.push_back(kind);
}

std::vector<std::uint8_t> FrameSchedule::pulse_pattern() const {
  if (!is_dense()) {
    throw ParameterError("pulse_pattern needs a dense frame");
  }
  std::vector<std::uint8_t> out(2 * kinds_.size());
  for (std::size_t s = 0; s < kinds_.size(); ++s) {
    out[2 * s] = pulse_nonempty(kinds_[s], 0) ? 1 : 0;
    out[2 * s + 1] = pulse_nonempty(kinds_[s], 1) ? 1 : 0;
  }
  return out;
}

FrameSchedule generate_frame(BitSource& source, std::uint64_t n_slots, double decoy_fraction) {
  if (n_slots == 0) {
    throw ParameterError("generate_frame: n_slots must be > 0");
  }
  std::vector<SlotKind> kinds(n_slots);
  for (auto& k : kinds) {
    if (source.bernoulli(decoy_fraction)) {
      k = SlotKind::kDecoy;
    } else {
      k = source.next_bits(1)[0] ? SlotKind::kData1 : SlotKind::kData0;
    }
  }
  return FrameSchedule::dense(std::move(kinds));
}

// ---------------------------------------------------------------- transmission

PulseModel PulseModel::from_link(const LinkParams& link) {
  const auto cp = click_probabilities(link);
  const double p0 = monitor_base_probability(link);
  const double pd = monitor_dark_probability(link);
  const auto& ifm = link.interferometer;

  PulseModel m;
  m.monitor_fraction = link.protocol.monitor_fraction;
  m.data_full = either(cp.p_signal, cp.p_dark);
  m.data_empty = either(link.protocol.optical_error * cp.p_signal, cp.p_dark);
  // Neither pulse lit: darks only. One lit: half a pulse of light split
  // evenly, no interference. Both lit: fringe.
  m.monitor[0][0] = m.monitor[0][1] = pd;
  m.monitor[1][0] = m.monitor[1][1] = either(p0 / 4.0, pd);
  m.monitor[2][0] = either(monitor_click_prob(ifm.phase_rad, ifm.intrinsic_visibility, p0), pd);
  m.monitor[2][1] =
      either(monitor_constructive_prob(ifm.phase_rad, ifm.intrinsic_visibility, p0), pd);
  return m;
}

DetectionRecord simulate_transmission(const FrameSchedule& frame, const LinkParams& link,
                                      BitSource& source) {
  if (!frame.is_dense()) {
    throw ParameterError("simulate_transmission needs a dense frame");
  }
  const PulseModel model = PulseModel::from_link(link);
  DetectionRecord rec;
  rec.first_slot = frame.first_slot();
  rec.n_slots = frame.n_slots();

  bool prev_lit = false;
  for (std::uint64_t s = frame.first_slot(); s < frame.end_slot(); ++s) {
    const SlotKind kind = frame.kind(s);
    bool click[2] = {false, false};
    for (unsigned h = 0; h < 2; ++h) {
      const std::uint64_t pulse = 2 * s + h;
      const bool lit = pulse_nonempty(kind, h);
      if (source.bernoulli(model.monitor_fraction)) {
        rec.routed_to_monitor.push_back(pulse);
        const int pair = int{prev_lit} + int{lit};
        if (source.bernoulli(model.monitor[pair][0])) {
          rec.monitor_clicks.push_back({pulse, Port::kDestructive});
        }
        if (source.bernoulli(model.monitor[pair][1])) {
          rec.monitor_clicks.push_back({pulse, Port::kConstructive});
        }
      } else {
        click[h] = source.bernoulli(lit ? model.data_full : model.data_empty);
      }
      prev_lit = lit;
    }
    if (click[0] && click[1]) {
      ++rec.double_clicks;
    } else if (click[0] || click[1]) {
      rec.data_clicks.push_back({s, click[0] ? Half::kFirst : Half::kSecond});
    }
  }
  return rec;
}

EventDrivenTransmission::EventDrivenTransmission(const LinkParams& link, BitSource source)
    : model_(PulseModel::from_link(link)),
      decoy_fraction_(link.protocol.decoy_fraction),
      source_(std::move(source)) {
  const double m = model_.monitor_fraction;
  for (int pair = 0; pair < 3; ++pair) {
    for (int cur = 0; cur < 2; ++cur) {
      const double data = cur ? model_.data_full : model_.data_empty;
      accept_[pair][cur] =
          m * either(model_.monitor[pair][0], model_.monitor[pair][1]) + (1.0 - m) * data;
      // Only (0,0), (1,*), (2,1) are reachable; the bound covers all anyway.
      lambda_ = std::max(lambda_, accept_[pair][cur]);
    }
  }
}

SlotKind EventDrivenTransmission::draw_kind() {
  if (source_.bernoulli(decoy_fraction_)) {
    return SlotKind::kDecoy;
  }
  return source_.next_bits(1)[0] ? SlotKind::kData1 : SlotKind::kData0;
}

SlotKind EventDrivenTransmission::materialize(std::uint64_t slot, FrameSchedule& frame) {
  for (int i = 0; i < 2; ++i) {
    if (cache_slot_[i] == slot) {
      frame.add(slot, cache_kind_[i]);
      return cache_kind_[i];
    }
  }
  const SlotKind kind = draw_kind();
  cache_slot_[0] = cache_slot_[1];
  cache_kind_[0] = cache_kind_[1];
  cache_slot_[1] = slot;
  cache_kind_[1] = kind;
  frame.add(slot, kind);
  return kind;
}

TransmissionChunk EventDrivenTransmission::next(std::uint64_t n_slots) {
  TransmissionChunk chunk;
  chunk.frame = FrameSchedule::sparse(next_slot_, n_slots);
  chunk.record.first_slot = next_slot_;
  chunk.record.n_slots = n_slots;
  const std::uint64_t end_pulse = 2 * (next_slot_ + n_slots);

  std::uint64_t cur_slot = ~std::uint64_t{0};
  bool click[2] = {false, false};
  auto finish_slot = [&]() {
    if (cur_slot == ~std::uint64_t{0}) {
      return;
    }
    if (click[0] && click[1]) {
      ++chunk.record.double_clicks;
    } else if (click[0] || click[1]) {
      chunk.record.data_clicks.push_back({cur_slot, click[0] ? Half::kFirst : Half::kSecond});
    }
    click[0] = click[1] = false;
  };

  const double m = model_.monitor_fraction;
  while (lambda_ > 0.0) {
    const std::uint64_t gap = source_.geometric(lambda_);
    if (gap >= end_pulse - next_pulse_) {
      break;  // memoryless: the overshoot is redrawn on the next chunk
    }
    const std::uint64_t pulse = next_pulse_ + gap;
    next_pulse_ = pulse + 1;
    const std::uint64_t slot = pulse / 2;
    const unsigned half = pulse % 2;
    if (slot != cur_slot) {
      finish_slot();
      cur_slot = slot;
    }

    bool prev_lit = false;
    SlotKind kind;
    if (half == 0) {
      if (slot > 0) {
        prev_lit = pulse_nonempty(materialize(slot - 1, chunk.frame), 1);
      }
      kind = materialize(slot, chunk.frame);
    } else {
      kind = materialize(slot, chunk.frame);
      prev_lit = pulse_nonempty(kind, 0);
    }
    const bool lit = pulse_nonempty(kind, half);
    const int pair = int{prev_lit} + int{lit};
    const double a = accept_[pair][lit ? 1 : 0];
    if (!source_.bernoulli(a / lambda_)) {
      continue;
    }

    // Conditional on "something happened at this pulse".
    const double qd = model_.monitor[pair][0];
    const double qc = model_.monitor[pair][1];
    const double w_d = m * qd * (1.0 - qc);
    const double w_c = m * qc * (1.0 - qd);
    const double w_dc = m * qd * qc;
    double u = source_.next_unit() * a;
    if (u < w_d + w_c + w_dc) {
      chunk.record.routed_to_monitor.push_back(pulse);
      if (u < w_d) {
        chunk.record.monitor_clicks.push_back({pulse, Port::kDestructive});
      } else if (u < w_d + w_c) {
        chunk.record.monitor_clicks.push_back({pulse, Port::kConstructive});
      } else {
        chunk.record.monitor_clicks.push_back({pulse, Port::kDestructive});
        chunk.record.monitor_clicks.push_back({pulse, Port::kConstructive});
      }
    } else {
      click[half] = true;
    }
  }
  finish_slot();
  next_slot_ += n_slots;
  next_pulse_ = end_pulse;
  return chunk;
}

// ---------------------------------------------------------------- sifting

BobDecoded bob_decode(const DetectionRecord& record) {
  BobDecoded out;
  out.slots.reserve(record.data_clicks.size());
  for (const auto& c : record.data_clicks) {
    out.slots.push_back(c.slot);
    out.bits.push_back(c.half == Half::kSecond);
  }
  return out;
}

CoherenceCounts& CoherenceCounts::operator+=(const CoherenceCounts& o) noexcept {
  destructive_decoy += o.destructive_decoy;
  constructive_decoy += o.constructive_decoy;
  destructive_boundary += o.destructive_boundary;
  constructive_boundary += o.constructive_boundary;
  return *this;
}

CoherenceCounts coherence_counts(std::span<const MonitorClick> clicks, const FrameSchedule& frame) {
  CoherenceCounts out;
  for (const auto& c : clicks) {
    if (c.pulse == 0) {
      continue;
    }
    const std::uint64_t cur_slot = c.pulse / 2;
    const std::uint64_t prev_slot = (c.pulse - 1) / 2;
    if (!frame.contains(cur_slot) || !frame.contains(prev_slot)) {
      continue;
    }
    if (!frame.pulse_nonempty_at(c.pulse) || !frame.pulse_nonempty_at(c.pulse - 1)) {
      continue;
    }
    const bool destructive = c.port == Port::kDestructive;
    if (cur_slot == prev_slot) {
      (destructive ? out.destructive_decoy : out.constructive_decoy) += 1;
    } else {
      (destructive ? out.destructive_boundary : out.constructive_boundary) += 1;
    }
  }
  return out;
}

std::vector<bool> decoy_flags(const FrameSchedule& frame, std::span<const std::uint64_t> slots) {
  std::vector<bool> out;
  out.reserve(slots.size());
  for (auto s : slots) {
    out.push_back(frame.kind(s) == SlotKind::kDecoy);
  }
  return out;
}

SiftedBlock sift(const FrameSchedule& frame, const BobDecoded& decoded) {
  if (decoded.slots.size() != decoded.bits.size()) {
    throw ParameterError("sift: slot and bit counts differ");
  }
  SiftedBlock out;
  for (std::size_t i = 0; i < decoded.slots.size(); ++i) {
    const std::uint64_t s = decoded.slots[i];
    const SlotKind kind = frame.kind(s);
    if (kind == SlotKind::kDecoy) {
      ++out.decoy_detection_count;
      continue;
    }
    out.alice_bits.push_back(kind == SlotKind::kData1);
    out.bob_bits.push_back(decoded.bits[i]);
    out.slot_indices.push_back(s);
  }
  return out;
}

SiftedBlock sift(const FrameSchedule& frame, const DetectionRecord& record) {
  SiftedBlock out = sift(frame, bob_decode(record));
  out.coherence = coherence_counts(record.monitor_clicks, frame);
  return out;
}

// ---------------------------------------------------------------- visibility

VisibilityEstimate estimate_visibility(const CoherenceCounts& counts, double duration_s,
                                       const VisibilityPolicy& policy) {
  if (counts.total() == 0) {
    throw InsufficientStatisticsError("estimate_visibility: no coherent monitor counts");
  }
  VisibilityEstimate v;
  v.destructive = counts.destructive();
  v.constructive = counts.constructive();
  v.value = v.constructive >= v.destructive
                ? visibility(static_cast<double>(v.constructive), static_cast<double>(v.destructive))
                : 0.0;
  v.count_rate_hz = duration_s > 0.0 ? static_cast<double>(counts.total()) / duration_s : 0.0;
  v.reliable = counts.total() >= policy.min_counts && v.count_rate_hz >= policy.min_rate_hz;
  return v;
}

VisibilityEstimate estimate_visibility(const DetectionRecord& record, const FrameSchedule& frame,
                                       const LinkParams& link, const VisibilityPolicy& policy) {
  const double duration = static_cast<double>(record.n_slots) / link.source.bit_rate_hz();
  return estimate_visibility(coherence_counts(record.monitor_clicks, frame), duration, policy);
}

// ---------------------------------------------------------------- alignment

const char* stage_name(AlignmentStage stage) noexcept {
  switch (stage) {
    case AlignmentStage::kNoise:
      return "noise";
    case AlignmentStage::kScan:
      return "scan";
    case AlignmentStage::kHoldMax:
      return "hold_max";
    case AlignmentStage::kLockedMin:
      return "locked_min";
  }
  return "?";
}

void AlignmentTrace::write_csv(std::ostream& out) const {
  out << "time_s,stage,laser_offset_step,count_rate_hz\n";
  for (const auto& s : samples) {
    out << s.time_s << ',' << stage_name(s.stage) << ',' << s.laser_offset_step << ','
        << s.count_rate_hz << '\n';
  }
}

double coherent_pair_rate_hz(const LinkParams& link) {
  const double f = link.protocol.decoy_fraction;
  const double lit_edge = f + (1.0 - f) / 2.0;  // P(a given half of a slot is lit)
  // Second-half pulses pair inside their slot (lit only for decoys); first-half
  // pulses pair across the boundary with the previous slot's second half.
  const double coherent_per_pulse = 0.5 * f + 0.5 * lit_edge * lit_edge;
  return link.source.pulse_rate_hz * link.protocol.monitor_fraction * coherent_per_pulse;
}

double monitor_rate_hz(const LinkParams& link, double phase_rad) {
  const double p0 = monitor_base_probability(link);
  const double pd = monitor_dark_probability(link);
  const double p = either(monitor_click_prob(phase_rad, link.interferometer.intrinsic_visibility, p0), pd);
  return coherent_pair_rate_hz(link) * p;
}

namespace {

class AlignmentRun {
 public:
  AlignmentRun(const LinkParams& link, BitSource& source)
      : link_(link), source_(source), phase_(link.interferometer.phase_rad) {}

  // Counts at the destructive port over dt seconds with the given offset.
  std::uint64_t expose(std::int64_t offset, double dt, bool laser_on) {
    drift(dt);
    const double rate = laser_on
                            ? monitor_rate_hz(link_, true_phase(offset))
                            : coherent_pair_rate_hz(link_) * monitor_dark_probability(link_);
    return poisson(rate * dt);
  }

  double true_phase(std::int64_t offset) const {
    return phase_ + static_cast<double>(offset) * link_.interferometer.phase_per_step_rad;
  }

 private:
  void drift(double dt) {
    const double sigma = link_.interferometer.drift_std_rad_per_sqrt_s * std::sqrt(dt);
    if (sigma > 0.0) {
      std::normal_distribution<double> n(0.0, sigma);
      phase_ += n(source_);
    }
  }

  std::uint64_t poisson(double mean) {
    if (mean <= 0.0) {
      return 0;
    }
    std::poisson_distribution<std::uint64_t> p(mean);
    return p(source_);
  }

  const LinkParams& link_;
  BitSource& source_;
  double phase_;
};

// Fits c = a + b cos(x) + d sin(x), x = offset * step_phase, over the last
// full fringe of the scan (the most recent phase) and returns the offsets of
// the fitted minimum and maximum nearest the end of the scan. Falls back to
// the raw argmin/argmax if there is no fringe.
struct FringeFit {
  std::int64_t min_offset;
  std::int64_t max_offset;
  double amplitude;  // B, in counts per scan dwell; 0 without a fit
};

FringeFit fringe_extrema(
    const std::vector<std::pair<std::int64_t, std::uint64_t>>& scan, double step_phase) {
  const double two_pi = 2.0 * std::numbers::pi;
  std::size_t first = 0;
  const double end_x = static_cast<double>(scan.back().first) * step_phase;
  while (first + 1 < scan.size() &&
         end_x - static_cast<double>(scan[first + 1].first) * step_phase >= two_pi) {
    ++first;
  }
  double m[3][4] = {};
  for (std::size_t i = first; i < scan.size(); ++i) {
    const double x = static_cast<double>(scan[i].first) * step_phase;
    const double f[3] = {1.0, std::cos(x), std::sin(x)};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        m[r][c] += f[r] * f[c];
      }
      m[r][3] += f[r] * static_cast<double>(scan[i].second);
    }
  }
  // Gaussian elimination with partial pivoting.
  bool ok = true;
  for (int col = 0; col < 3 && ok; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::fabs(m[r][col]) > std::fabs(m[piv][col])) piv = r;
    }
    if (std::fabs(m[piv][col]) < 1e-12) {
      ok = false;
      break;
    }
    std::swap(m[col], m[piv]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double k = m[r][col] / m[col][col];
      for (int c = col; c < 4; ++c) m[r][c] -= k * m[col][c];
    }
  }
  const double b = ok ? m[1][3] / m[1][1] : 0.0;
  const double d = ok ? m[2][3] / m[2][2] : 0.0;
  if (!ok || std::hypot(b, d) == 0.0) {
    auto [mn, mx] = std::minmax_element(scan.begin(), scan.end(),
                                        [](const auto& l, const auto& r) { return l.second < r.second; });
    return {mn->first, mx->first, 0.0};
  }
  // b cos x + d sin x = -B cos(x + phi0), minimum where x + phi0 = 0.
  const double phi0 = std::atan2(d, -b);
  auto nearest = [&](double x0) {
    const double n = std::round((end_x - x0) / two_pi);
    return static_cast<std::int64_t>(std::llround((x0 + n * two_pi) / step_phase));
  };
  return {nearest(-phi0), nearest(std::numbers::pi - phi0), std::hypot(b, d)};
}

double wrap(double phase) {
  const double two_pi = 2.0 * std::numbers::pi;
  phase = std::fmod(phase, two_pi);
  if (phase > std::numbers::pi) phase -= two_pi;
  if (phase < -std::numbers::pi) phase += two_pi;
  return phase;
}

}  // namespace

AlignmentTrace simulate_alignment(const LinkParams& link, const AlignmentController& ctl,
                                  BitSource& source) {
  link.validate();
  const double step_phase = link.interferometer.phase_per_step_rad;
  if (static_cast<double>(ctl.scan_range_steps) * step_phase < 2.0 * std::numbers::pi) {
    throw ParameterError("simulate_alignment: scan range must cover at least 2 pi of phase");
  }
  if (ctl.scan_step <= 0 || !(ctl.scan_dwell_s > 0.0) || !(ctl.settle_time_s > 0.0) ||
      ctl.dither_steps < 0 || !(ctl.visibility_window_s > 0.0)) {
    throw ParameterError("simulate_alignment: invalid controller settings");
  }

  AlignmentTrace trace;
  trace.coherent_pair_rate_hz = coherent_pair_rate_hz(link);
  AlignmentRun run(link, source);
  double t = 0.0;
  auto record = [&](AlignmentStage stage, std::int64_t offset, std::uint64_t counts, double dt) {
    t += dt;
    trace.samples.push_back(
        {t, stage, offset, static_cast<double>(counts) / dt, run.true_phase(offset)});
  };

  // (i) laser off: detector noise in the coherent gates.
  for (double el = 0.0; el < ctl.noise_duration_s; el += ctl.settle_time_s) {
    record(AlignmentStage::kNoise, 0, run.expose(0, ctl.settle_time_s, false), ctl.settle_time_s);
  }

  // (ii) wavelength scan across the fringes.
  const std::int64_t lo = -ctl.scan_range_steps / 2;
  const std::int64_t hi = lo + ctl.scan_range_steps;
  std::vector<std::pair<std::int64_t, std::uint64_t>> scan;
  for (std::int64_t off = lo; off <= hi; off += ctl.scan_step) {
    const std::uint64_t c = run.expose(off, ctl.scan_dwell_s, true);
    record(AlignmentStage::kScan, off, c, ctl.scan_dwell_s);
    scan.emplace_back(off, c);
  }
  const FringeFit fit = fringe_extrema(scan, step_phase);
  const std::int64_t best_min = fit.min_offset;
  const std::int64_t best_max = fit.max_offset;
  const double fringe_hz = fit.amplitude / ctl.scan_dwell_s;

  // (iii) hold at the maximum to measure the constructive reference.
  std::uint64_t hold_counts = 0;
  double hold_time = 0.0;
  for (double el = 0.0; el < ctl.hold_duration_s; el += ctl.settle_time_s) {
    const std::uint64_t c = run.expose(best_max, ctl.settle_time_s, true);
    hold_counts += c;
    hold_time += ctl.settle_time_s;
    record(AlignmentStage::kHoldMax, best_max, c, ctl.settle_time_s);
  }
  trace.max_rate_hz = hold_time > 0.0 ? static_cast<double>(hold_counts) / hold_time : 0.0;

  // (iv) lock to the minimum with a dithered proportional controller.
  std::int64_t offset = best_min;
  const double dither_phase = static_cast<double>(ctl.dither_steps) * step_phase;
  std::uint64_t lock_counts = 0;
  double lock_time = 0.0;
  std::vector<std::uint64_t> window;
  const auto window_len = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(ctl.visibility_window_s / ctl.settle_time_s)));
  std::uint64_t window_sum = 0;
  double min_vis = 1.0;
  for (double el = 0.0; el < ctl.lock_duration_s; el += ctl.settle_time_s) {
    const double half = ctl.settle_time_s / 2.0;
    const std::uint64_t up = run.expose(offset + ctl.dither_steps, half, true);
    const std::uint64_t down = run.expose(offset - ctl.dither_steps, half, true);
    const std::uint64_t c = up + down;
    record(AlignmentStage::kLockedMin, offset, c, ctl.settle_time_s);
    lock_counts += c;
    lock_time += ctl.settle_time_s;

    window.push_back(c);
    window_sum += c;
    if (window.size() > window_len) {
      window_sum -= window.front();
      window.erase(window.begin());
    }
    if (window.size() == window_len && trace.max_rate_hz > 0.0) {
      const double rate = static_cast<double>(window_sum) / (window_len * ctl.settle_time_s);
      const double v = rate < trace.max_rate_hz ? visibility(trace.max_rate_hz, rate) : 0.0;
      trace.visibility_series.emplace_back(t, v);
      min_vis = std::min(min_vis, v);
    }

    // up - down = 2 B half sin(delta) sin(dither) on the fitted fringe.
    const double diff = static_cast<double>(up) - static_cast<double>(down);
    const double slope = 2.0 * fringe_hz * half * std::sin(dither_phase);
    double delta = 0.0;
    if (ctl.dither_steps == 0) {
      // No dither, no error signal: hold the offset.
    } else if (slope > 0.0) {
      delta = std::asin(std::clamp(diff / slope, -1.0, 1.0));
    } else if (up + down > 0) {
      delta = diff / static_cast<double>(up + down);  // no fit: normalised error
    }
    offset += std::llround(-ctl.gain * delta / step_phase);
  }
  trace.min_rate_hz = lock_time > 0.0 ? static_cast<double>(lock_counts) / lock_time : 0.0;
  trace.visibility = trace.max_rate_hz > trace.min_rate_hz && trace.max_rate_hz > 0.0
                         ? visibility(trace.max_rate_hz, trace.min_rate_hz)
                         : 0.0;
  trace.min_window_visibility = trace.visibility_series.empty() ? trace.visibility : min_vis;
  trace.final_phase_error_rad = wrap(run.true_phase(offset));
  return trace;
}

}  // namespace cowqkd
