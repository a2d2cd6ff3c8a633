// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cowqkd/cow_protocol.hpp"
#include "cowqkd/errors.hpp"
#include "cowqkd/photonic_model.hpp"
#include "cowqkd/randomness.hpp"
#include "cowqkd/session.hpp"

namespace cowqkd {

/// Bad config file contents or overrides (exit code 2).
class ConfigError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

/// Unreadable input or unwritable output (exit code 4).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Flat `section.key = value` settings. Every key has a default; setting an
/// unknown key is a ConfigError.
class ExperimentConfig {
 public:
  ExperimentConfig();

  /// Lines of `key = value`; '#' starts a comment; blank lines ignored.
  void load(std::istream& in, std::string_view origin = "config");
  void load_file(const std::string& path);
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;

  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  /// All keys, sorted, one `key = value` line each. Loading the output
  /// reproduces this config exactly.
  std::string serialize() const;
  /// 64-bit FNV-1a of serialize(), as 16 hex digits.
  std::string hash() const;
  /// Comment line for CSV outputs: "# cowqkd seed=<hex> config=<hash>".
  std::string provenance_line() const;

  Seed seed() const;
  LinkParams link(double length_km) const;
  LinkParams link() const { return link(get_double("fibre.length_km")); }
  DistillationParams distillation() const;
  AlignmentController alignment() const;
  SessionConfig session() const;
  /// Strictly positive and strictly increasing.
  std::vector<double> sweep_lengths() const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct SweepRow {
  double length_km = 0.0;
  double total_loss_db = 0.0;
  double analytic_qber = 0.0;
  double analytic_secret_rate = 0.0;
  bool simulated = false;
  double sim_qber = 0.0;
  double sim_secret_rate = 0.0;
  double visibility = 0.0;  // measured if simulated, else expected
};

/// One row per configured length, in length order. Simulated columns come
/// from `sweep.slots` event-driven slots per length; lengths run in parallel
/// on independent sources forked by length.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config);
void write_sweep_csv(std::ostream& out, const ExperimentConfig& config,
                     const std::vector<SweepRow>& rows);

/// analytic_rates at fibre.length_km as `quantity,value` rows.
void write_predict_csv(std::ostream& out, const ExperimentConfig& config);

AlignmentTrace run_align(const ExperimentConfig& config);
void write_align_csv(std::ostream& out, const ExperimentConfig& config,
                     const AlignmentTrace& trace);

SessionResult run_session(const ExperimentConfig& config);
void write_session_csv(std::ostream& out, const ExperimentConfig& config,
                       const SessionReport& report);

}  // namespace cowqkd
