// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cowqkd/distillation.hpp"
#include "cowqkd/errors.hpp"
#include "cowqkd/photonic_model.hpp"
#include "oracles.hpp"

using namespace cowqkd;
using doctest::Approx;

TEST_CASE("link budget") {
  FibreParams f;
  CHECK(transmittance(f) == 1.0);

  f.length_km = 250;
  f.excess_loss_db = 1.6;
  CHECK(total_loss_db(f) == Approx(42.6).epsilon(1e-12));
  CHECK(std::fabs(transmittance(f) - 5.50e-5) <= 1e-7);

  FibreParams smf;
  smf.length_km = 213;
  smf.attenuation_db_per_km = 0.2;
  CHECK(total_loss_db(smf) == Approx(total_loss_db(f)).epsilon(1e-12));
  CHECK(transmittance(smf) == Approx(std::pow(10.0, -4.26)).epsilon(1e-12));

  // Default excess loss scales with length and gives 42.6 dB at 250 km.
  CHECK(std::fabs(total_loss_db(default_link(250).fibre) - 42.6) <= 0.1);
}

TEST_CASE("transmittance is monotone and multiplicative") {
  FibreParams a, b, ab;
  a.length_km = 37;
  b.length_km = 81;
  ab.length_km = 118;
  CHECK(transmittance(a) * transmittance(b) == Approx(transmittance(ab)).epsilon(1e-12));
  double prev = 1.1;
  for (double L = 0; L <= 300; L += 10) {
    FibreParams f;
    f.length_km = L;
    CHECK(transmittance(f) < prev);
    prev = transmittance(f);
  }
  FibreParams lossier = ab;
  lossier.attenuation_db_per_km = 0.2;
  CHECK(transmittance(lossier) < transmittance(ab));
}

TEST_CASE("click probabilities") {
  LinkParams link = default_link(250);
  link.fibre.excess_loss_db = 1.6;
  const auto cp = click_probabilities(link);
  CHECK(cp.p_dark == Approx(8.0e-9).epsilon(1e-12));
  const double t = std::pow(10.0, -4.26);
  CHECK(cp.p_signal == Approx(1.0 - std::exp(-0.5 * t * 0.0265)).epsilon(1e-12));
  CHECK(cp.p_signal == Approx(7.28e-7).epsilon(0.01));

  link.data_detector.efficiency = 0.0;
  CHECK(click_probabilities(link).p_signal == 0.0);
}

TEST_CASE("expected QBER") {
  for (double L : {0.0, 50.0, 100.0, 175.0, 250.0}) {
    const LinkParams link = default_link(L);
    const double t = transmittance(link.fibre);
    CHECK(expected_qber(link) ==
          Approx(oracle::cow_qber(0.5, t, 0.0265, 5.0, 1.6e-9, 0.008)).epsilon(1e-9));
  }
  CHECK(std::fabs(expected_qber(default_link(100)) - 0.0083) <= 0.0005);
  CHECK(std::fabs(expected_qber(default_link(250)) - 0.0186) <= 0.001);

  LinkParams quiet = default_link(100);
  quiet.data_detector.dark_rate_hz = 0;
  quiet.protocol.optical_error = 0;
  CHECK(expected_qber(quiet) == 0.0);

  LinkParams dead = default_link(100);
  dead.data_detector.efficiency = 0;
  CHECK_THROWS_AS(expected_qber(dead), UndefinedQberError);
}

TEST_CASE("expected QBER is monotone in dark rate and length") {
  double prev = 0;
  for (double d : {0.0, 1.0, 5.0, 50.0, 500.0}) {
    LinkParams l = default_link(200);
    l.data_detector.dark_rate_hz = d;
    CHECK(expected_qber(l) >= prev);
    prev = expected_qber(l);
  }
  prev = 0;
  for (double L = 0; L <= 300; L += 25) {
    CHECK(expected_qber(default_link(L)) >= prev);
    prev = expected_qber(default_link(L));
  }
}

TEST_CASE("monitor interference") {
  const double pi = std::numbers::pi;
  CHECK(monitor_click_prob(0, 1, 0.3) == Approx(0.0));
  CHECK(monitor_click_prob(pi, 1, 0.3) == Approx(0.3));
  CHECK(monitor_click_prob(0, 0.92, 1.0) == Approx(0.04));
  for (double phi = -4; phi < 4; phi += 0.37) {
    for (double v : {0.0, 0.5, 0.95, 1.0}) {
      CHECK(monitor_click_prob(phi, v, 0.2) + monitor_constructive_prob(phi, v, 0.2) ==
            Approx(0.2));
      CHECK(monitor_constructive_prob(phi, v, 0.2) ==
            Approx(0.2 * (1 + v * std::cos(phi)) / 2));
    }
  }
}

TEST_CASE("visibility") {
  CHECK(visibility(1000, 0) == 1.0);
  CHECK(visibility(500, 500) == 0.0);
  CHECK(visibility(1000, 40) == Approx(0.923).epsilon(1e-3));
  CHECK(visibility(1000, 40) == Approx(960.0 / 1040.0));
  for (double m : {0.001, 3.0, 1e6}) {
    CHECK(visibility(m * 977, m * 31) == Approx(visibility(977, 31)));
  }
  CHECK_THROWS_AS(visibility(0, 0), UndefinedVisibilityError);
  CHECK_THROWS_AS(visibility(10, 20), ParameterError);
}

TEST_CASE("dead time correction") {
  CHECK(dead_time_correction(1e6, 0) == 1.0);
  CHECK(dead_time_correction(1e5, 1e-5) == Approx(0.5));
  CHECK(dead_time_correction(228, 1e-7) > 0.99997);
}

TEST_CASE("analytic rates") {
  LinkParams dark = default_link(100);
  dark.data_detector.efficiency = 0;
  const auto zero = analytic_rates(dark);
  CHECK(zero.secret_rate_hz == 0.0);
  CHECK(zero.sifted_rate_hz == 0.0);

  const auto r100 = analytic_rates(default_link(100));
  CHECK(r100.secret_rate_hz >= 600.0);
  CHECK(r100.secret_rate_hz <= 60000.0);
  const auto r250 = analytic_rates(default_link(250));
  CHECK(r250.secret_rate_hz >= 1.5);
  CHECK(r250.secret_rate_hz <= 150.0);

  double prev = 1e300;
  for (double L = 0; L <= 300; L += 10) {
    const auto r = analytic_rates(default_link(L));
    CHECK(r.secret_rate_hz <= r.sifted_rate_hz);
    CHECK(r.secret_rate_hz < prev);
    CHECK(r.qber >= 0.0);
    CHECK(r.qber <= 0.5);
    CHECK(r.p_signal >= 0.0);
    CHECK(r.p_signal <= 1.0);
    CHECK(r.expected_visibility >= 0.0);
    CHECK(r.expected_visibility <= 1.0);
    prev = r.secret_rate_hz;
  }

  // Sifted rate from first principles: one click on a data slot that was
  // not routed to the monitor, times the data-slot rate and dead time.
  const LinkParams l = default_link(150);
  const auto cp = click_probabilities(l);
  const double m = l.protocol.monitor_fraction;
  const double full = (1 - m) * (1 - (1 - cp.p_signal) * (1 - cp.p_dark));
  const double empty =
      (1 - m) * (1 - (1 - l.protocol.optical_error * cp.p_signal) * (1 - cp.p_dark));
  const double one = full * (1 - empty) + empty * (1 - full);
  const auto r = analytic_rates(l);
  CHECK(r.sifted_rate_hz ==
        Approx(312.5e6 * 0.9 * one * r.dead_time_factor).epsilon(1e-9));

  // Zero secret when the visibility is too poor.
  LinkParams poor = default_link(100);
  poor.interferometer.intrinsic_visibility = 0.3;
  CHECK(analytic_rates(poor).secret_rate_hz == 0.0);
}

TEST_CASE("parameter validation") {
  LinkParams l = default_link(10);
  l.fibre.length_km = -1;
  CHECK_THROWS_AS(l.validate(), ParameterError);
  l = default_link(10);
  l.source.mu = 0;
  CHECK_THROWS_AS(l.validate(), ParameterError);
  l = default_link(10);
  l.data_detector.efficiency = 1.5;
  CHECK_THROWS_AS(l.validate(), ParameterError);
  l = default_link(10);
  l.protocol.decoy_fraction = -0.1;
  CHECK_THROWS_AS(l.validate(), ParameterError);
  CHECK(default_link(10).source.bit_rate_hz() == 312.5e6);
}
