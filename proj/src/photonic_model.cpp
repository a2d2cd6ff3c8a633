// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "cowqkd/photonic_model.hpp"

#include <algorithm>
#include <cmath>

#include "cowqkd/distillation.hpp"
#include "cowqkd/errors.hpp"

namespace cowqkd {

namespace {

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

// Probability that at least one of two independent events fires.
double either(double a, double b) { return 1.0 - (1.0 - a) * (1.0 - b); }

}  // namespace

void FibreParams::validate() const {
  if (!(length_km >= 0.0) || !(attenuation_db_per_km >= 0.0) || !(excess_loss_db >= 0.0)) {
    throw ParameterError("fibre: length, attenuation and excess loss must be >= 0");
  }
}

void SourceParams::validate() const {
  if (!(mu > 0.0)) {
    throw ParameterError("source: mu must be > 0");
  }
  if (!(pulse_rate_hz > 0.0)) {
    throw ParameterError("source: pulse_rate_hz must be > 0");
  }
}

void DetectorParams::validate() const {
  if (!is_probability(efficiency) || !(efficiency_scale >= 0.0) ||
      !is_probability(effective_efficiency())) {
    throw ParameterError("detector: efficiency (after scaling) must be in [0, 1]");
  }
  if (!(dark_rate_hz >= 0.0)) {
    throw ParameterError("detector: dark_rate_hz must be >= 0");
  }
  if (!(gate_window_s > 0.0)) {
    throw ParameterError("detector: gate_window_s must be > 0");
  }
  if (!(dead_time_s >= 0.0)) {
    throw ParameterError("detector: dead_time_s must be >= 0");
  }
}

void InterferometerParams::validate() const {
  if (!is_probability(intrinsic_visibility)) {
    throw ParameterError("interferometer: intrinsic_visibility must be in [0, 1]");
  }
  if (!(drift_std_rad_per_sqrt_s >= 0.0)) {
    throw ParameterError("interferometer: drift must be >= 0");
  }
  if (!(phase_per_step_rad > 0.0)) {
    throw ParameterError("interferometer: phase_per_step_rad must be > 0");
  }
}

void ProtocolParams::validate() const {
  if (!is_probability(decoy_fraction) || !is_probability(monitor_fraction) ||
      !is_probability(optical_error)) {
    throw ParameterError("protocol: fractions and optical_error must be in [0, 1]");
  }
}

void LinkParams::validate() const {
  fibre.validate();
  source.validate();
  data_detector.validate();
  monitor_detector.validate();
  interferometer.validate();
  protocol.validate();
}

LinkParams default_link(double length_km) {
  LinkParams link;
  link.fibre.length_km = length_km;
  link.fibre.attenuation_db_per_km = 0.164;
  link.fibre.excess_loss_db = kDefaultExcessLossDbPerKm * length_km;
  link.monitor_detector.efficiency = 0.02;
  return link;
}

double total_loss_db(const FibreParams& fibre) {
  fibre.validate();
  return fibre.length_km * fibre.attenuation_db_per_km + fibre.excess_loss_db;
}

double transmittance(const FibreParams& fibre) {
  return std::pow(10.0, -total_loss_db(fibre) / 10.0);
}

ClickProbabilities click_probabilities(const LinkParams& link) {
  link.validate();
  const double t = transmittance(link.fibre);
  const auto& det = link.data_detector;
  ClickProbabilities cp;
  cp.p_signal = -std::expm1(-link.source.mu * t * det.effective_efficiency());
  // A detector with zero efficiency is treated as switched off: no darks either.
  cp.p_dark = det.effective_efficiency() > 0.0 ? std::min(1.0, det.dark_rate_hz * det.gate_window_s) : 0.0;
  return cp;
}

double monitor_base_probability(const LinkParams& link) {
  link.validate();
  const double t = transmittance(link.fibre);
  return -std::expm1(-link.source.mu * t * link.monitor_detector.effective_efficiency());
}

double monitor_dark_probability(const LinkParams& link) {
  const auto& det = link.monitor_detector;
  return det.effective_efficiency() > 0.0 ? std::min(1.0, det.dark_rate_hz * det.gate_window_s) : 0.0;
}

double expected_qber(const LinkParams& link) {
  const auto cp = click_probabilities(link);
  const double e = link.protocol.optical_error;
  const double denom = cp.p_signal * (1.0 + e) + 2.0 * cp.p_dark;
  if (denom <= 0.0) {
    throw UndefinedQberError("expected_qber: link produces no clicks");
  }
  return std::clamp((e * cp.p_signal + cp.p_dark) / denom, 0.0, 0.5);
}

double monitor_click_prob(double phase_rad, double visibility, double base_prob) {
  if (!is_probability(visibility) || !is_probability(base_prob)) {
    throw ParameterError("monitor_click_prob: visibility and base_prob must be in [0, 1]");
  }
  return base_prob * (1.0 - visibility * std::cos(phase_rad)) / 2.0;
}

double monitor_constructive_prob(double phase_rad, double visibility, double base_prob) {
  if (!is_probability(visibility) || !is_probability(base_prob)) {
    throw ParameterError("monitor_constructive_prob: visibility and base_prob must be in [0, 1]");
  }
  return base_prob * (1.0 + visibility * std::cos(phase_rad)) / 2.0;
}

double visibility(double max_counts, double min_counts) {
  if (!(min_counts >= 0.0) || !(max_counts >= min_counts)) {
    throw ParameterError("visibility: need max_counts >= min_counts >= 0");
  }
  if (max_counts == 0.0) {
    throw UndefinedVisibilityError("visibility: max_counts is zero");
  }
  return (max_counts - min_counts) / (max_counts + min_counts);
}

double dead_time_correction(double raw_rate_hz, double dead_time_s) {
  if (!(raw_rate_hz >= 0.0) || !(dead_time_s >= 0.0)) {
    throw ParameterError("dead_time_correction: rate and dead time must be >= 0");
  }
  return 1.0 / (1.0 + raw_rate_hz * dead_time_s);
}

double expected_visibility(const LinkParams& link) {
  const double p0 = monitor_base_probability(link);
  const double pd = monitor_dark_probability(link);
  const auto& ifm = link.interferometer;
  const double destructive = either(monitor_click_prob(ifm.phase_rad, ifm.intrinsic_visibility, p0), pd);
  const double constructive =
      either(monitor_constructive_prob(ifm.phase_rad, ifm.intrinsic_visibility, p0), pd);
  if (constructive + destructive <= 0.0) {
    return 0.0;
  }
  return std::max(0.0, (constructive - destructive) / (constructive + destructive));
}

RatePrediction analytic_rates(const LinkParams& link, const DistillationParams& params) {
  const auto cp = click_probabilities(link);
  const double m = link.protocol.monitor_fraction;
  const double f = link.protocol.decoy_fraction;
  const double e = link.protocol.optical_error;

  // Per-pulse click probability on the data line, monitor routing included.
  const double full = (1.0 - m) * either(cp.p_signal, cp.p_dark);
  const double empty = (1.0 - m) * either(e * cp.p_signal, cp.p_dark);

  RatePrediction r;
  r.transmittance = transmittance(link.fibre);
  r.p_signal = cp.p_signal;
  r.p_dark = cp.p_dark;
  // Double clicks are discarded, so a data slot sifts on exactly one click.
  r.p_sift_per_data_slot = full * (1.0 - empty) + empty * (1.0 - full);
  const double bit_rate = link.source.bit_rate_hz();
  r.raw_click_rate_hz = bit_rate * ((1.0 - f) * (full + empty) + f * 2.0 * full);
  r.dead_time_factor = dead_time_correction(r.raw_click_rate_hz, link.data_detector.dead_time_s);
  r.sifted_rate_hz = bit_rate * (1.0 - f) * r.p_sift_per_data_slot * r.dead_time_factor;
  r.expected_visibility = expected_visibility(link);
  if (r.sifted_rate_hz == 0.0) {
    return r;  // nothing detected: zero rates, qber left at 0
  }
  r.qber = expected_qber(link);

  const std::size_t n = params.block_size;
  const auto leak = static_cast<std::size_t>(
      std::ceil(params.leak_efficiency * static_cast<double>(n) * binary_entropy(r.qber)));
  const std::size_t secret = compute_secret_length(n, leak + params.confirm_bits,
                                                   r.expected_visibility, params.epsilon_pa,
                                                   params.eve_bound);
  r.secret_fraction = static_cast<double>(secret) / static_cast<double>(n);
  r.secret_rate_hz = r.sifted_rate_hz * r.secret_fraction;
  return r;
}

}  // namespace cowqkd
