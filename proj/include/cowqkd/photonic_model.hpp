// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace cowqkd {

/// Fibre link. Excess loss (splices, connectors) is a whole-link figure.
struct FibreParams {
  double length_km = 0.0;
  double attenuation_db_per_km = 0.164;
  double excess_loss_db = 0.0;

  void validate() const;
};

struct SourceParams {
  double mu = 0.5;                // mean photon number of a non-empty pulse
  double pulse_rate_hz = 625e6;

  double bit_rate_hz() const noexcept { return pulse_rate_hz / 2.0; }
  void validate() const;
};

struct DetectorParams {
  double efficiency = 0.0265;
  double dark_rate_hz = 5.0;
  double gate_window_s = 1.6e-9;
  double dead_time_s = 1e-7;
  /// Multiplies `efficiency`; stands in for slow polarisation-dependent drift.
  double efficiency_scale = 1.0;

  double effective_efficiency() const noexcept { return efficiency * efficiency_scale; }
  void validate() const;
};

struct InterferometerParams {
  double intrinsic_visibility = 0.95;
  double phase_rad = 0.0;  // 0 is the destructive-port minimum
  double phase_per_step_rad = 0.05;
  double drift_std_rad_per_sqrt_s = 0.05;

  void validate() const;
};

struct ProtocolParams {
  double decoy_fraction = 0.1;
  double monitor_fraction = 0.1;
  /// Baseline data-line error from finite modulator extinction (fit value).
  double optical_error = 0.008;

  void validate() const;
};

struct LinkParams {
  FibreParams fibre;
  SourceParams source;
  DetectorParams data_detector;
  DetectorParams monitor_detector;
  InterferometerParams interferometer;
  ProtocolParams protocol;

  void validate() const;
};

/// Excess loss per km used to scale the 1.6 dB of the 250 km link
/// (42.6 dB total minus 41.0 dB of fibre) to other lengths.
inline constexpr double kDefaultExcessLossDbPerKm = 1.6 / 250.0;

/// Default link: ULL fibre of the given length, SSPD data detector
/// (2.65 %, 5 Hz), 625 MHz clock, mu = 0.5.
LinkParams default_link(double length_km);

double total_loss_db(const FibreParams& fibre);
/// 10^(-(L*alpha + excess)/10).
double transmittance(const FibreParams& fibre);

struct ClickProbabilities {
  double p_signal = 0.0;  // per non-empty pulse reaching the data detector
  double p_dark = 0.0;    // per gated half-slot
};

ClickProbabilities click_probabilities(const LinkParams& link);

/// Click probability on one monitor port from a full pulse's worth of light.
double monitor_base_probability(const LinkParams& link);
double monitor_dark_probability(const LinkParams& link);

/// (e*ps + pd) / (ps*(1+e) + 2*pd). Throws UndefinedQberError if ps = pd = 0.
double expected_qber(const LinkParams& link);

/// Destructive port: base * (1 - V cos(phase)) / 2.
double monitor_click_prob(double phase_rad, double visibility, double base_prob);
/// Constructive port: base * (1 + V cos(phase)) / 2.
double monitor_constructive_prob(double phase_rad, double visibility, double base_prob);

/// (max - min) / (max + min).
double visibility(double max_counts, double min_counts);

/// Non-paralyzable dead time: 1 / (1 + rate * dead_time).
double dead_time_correction(double raw_rate_hz, double dead_time_s);

/// Visibility the monitor line should measure on coherent pairs, including
/// monitor dark counts, at the link's current phase.
double expected_visibility(const LinkParams& link);

/// Eve's information per sifted bit as a function of measured visibility.
using EveBound = std::function<double(double)>;

/// Parameters shared by the analytic model and the distillation accounting.
struct DistillationParams {
  std::size_t block_size = 32768;
  double leak_efficiency = 1.2;  // leaked ~ f * n * h(Q)
  double epsilon_pa = 1e-9;
  std::size_t confirm_bits = 64;
  EveBound eve_bound;  // empty -> default h((1+V)/2)
};

struct RatePrediction {
  double transmittance = 0.0;
  double p_signal = 0.0;
  double p_dark = 0.0;
  double p_sift_per_data_slot = 0.0;  // exactly one data click, routing included
  double raw_click_rate_hz = 0.0;
  double dead_time_factor = 1.0;
  double sifted_rate_hz = 0.0;
  double qber = 0.0;
  double expected_visibility = 0.0;
  double secret_fraction = 0.0;
  double secret_rate_hz = 0.0;
};

RatePrediction analytic_rates(const LinkParams& link, const DistillationParams& params = {});

}  // namespace cowqkd
