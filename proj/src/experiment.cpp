// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "cowqkd/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "cowqkd/distillation.hpp"
#include "cowqkd/errors.hpp"

namespace cowqkd {

namespace {

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> d = {
      {"run.seed", "1"},

      {"fibre.length_km", "250"},
      {"fibre.attenuation_db_per_km", "0.164"},
      {"fibre.excess_loss_db_per_km", "0.0064"},

      {"source.mu", "0.5"},
      {"source.pulse_rate_hz", "625e6"},

      {"detector.efficiency", "0.0265"},
      {"detector.dark_rate_hz", "5"},
      {"detector.gate_window_s", "1.6e-9"},
      {"detector.dead_time_s", "1e-7"},
      {"detector.efficiency_scale", "1"},

      {"monitor.efficiency", "0.02"},
      {"monitor.dark_rate_hz", "5"},
      {"monitor.gate_window_s", "1.6e-9"},
      {"monitor.dead_time_s", "1e-7"},

      {"interferometer.intrinsic_visibility", "0.95"},
      {"interferometer.phase_rad", "0"},
      {"interferometer.phase_per_step_rad", "0.05"},
      {"interferometer.drift_std_rad_per_sqrt_s", "0.05"},

      {"protocol.decoy_fraction", "0.1"},
      {"protocol.monitor_fraction", "0.1"},
      {"protocol.optical_error", "0.008"},

      {"distillation.block_size", "32768"},
      {"distillation.leak_efficiency", "1.2"},
      {"distillation.epsilon_pa", "1e-9"},
      {"distillation.eve_bound", "entropy"},

      {"session.n_blocks", "3"},
      {"session.bootstrap_key_bits", "10000"},
      {"session.tag_len", "64"},
      {"session.initial_qber_estimate", "0.02"},
      {"session.cascade_passes", "4"},
      {"session.visibility_fallback", "floor"},
      {"session.visibility_floor", "0.92"},
      {"session.visibility_min_counts", "100"},
      {"session.visibility_min_rate_hz", "100"},
      {"session.block_timeout_s", "3600"},
      {"session.classical_latency_s", "0"},
      {"session.run_alignment", "true"},
      {"session.align_lock_s", "30"},

      {"alignment.scan_range_steps", "280"},
      {"alignment.scan_step", "1"},
      {"alignment.scan_dwell_s", "0.1"},
      {"alignment.settle_time_s", "0.5"},
      {"alignment.gain", "0.6"},
      {"alignment.dither_steps", "2"},
      {"alignment.noise_duration_s", "10"},
      {"alignment.hold_duration_s", "30"},
      {"alignment.lock_duration_s", "7200"},
      {"alignment.visibility_window_s", "10"},

      {"sweep.lengths_km", "100,125,150,175,200,225,250"},
      {"sweep.slots", "100000000"},
      {"sweep.analytic_only", "false"},
  };
  return d;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& key, const std::string& text) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (text.empty() || end != begin + text.size() || !std::isfinite(v)) {
    throw ConfigError(key + ": not a finite number: '" + text + "'");
  }
  return v;
}

}  // namespace

ExperimentConfig::ExperimentConfig() : values_(defaults()) {}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw ConfigError("unknown config key '" + key + "'");
  }
  it->second = value;
}

const std::string& ExperimentConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw ConfigError("unknown config key '" + key + "'");
  }
  return it->second;
}

void ExperimentConfig::load(std::istream& in, std::string_view origin) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) {
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) +
                        ": expected key = value");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    try {
      set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void ExperimentConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot read config file " + path);
  }
  load(in, path);
}

double ExperimentConfig::get_double(const std::string& key) const {
  return parse_double(key, get(key));
}

std::int64_t ExperimentConfig::get_int(const std::string& key) const {
  const double v = get_double(key);
  if (v != std::floor(v) || std::fabs(v) > 9.0e15) {
    throw ConfigError(key + ": not an integer: '" + get(key) + "'");
  }
  return static_cast<std::int64_t>(v);
}

std::size_t ExperimentConfig::get_size(const std::string& key) const {
  const std::int64_t v = get_int(key);
  if (v < 0) {
    throw ConfigError(key + ": must be non-negative");
  }
  return static_cast<std::size_t>(v);
}

bool ExperimentConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": not a boolean: '" + v + "'");
}

std::string ExperimentConfig::serialize() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k + " = " + v + "\n";
  }
  return out;
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ExperimentConfig::provenance_line() const {
  return "# cowqkd seed=" + seed_to_hex(seed()) + " config=" + hash();
}

Seed ExperimentConfig::seed() const {
  try {
    return seed_from_hex(get("run.seed"));
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("run.seed: ") + e.what());
  }
}

LinkParams ExperimentConfig::link(double length_km) const {
  LinkParams l = default_link(length_km);
  l.fibre.attenuation_db_per_km = get_double("fibre.attenuation_db_per_km");
  l.fibre.excess_loss_db = get_double("fibre.excess_loss_db_per_km") * length_km;
  l.source.mu = get_double("source.mu");
  l.source.pulse_rate_hz = get_double("source.pulse_rate_hz");
  l.data_detector.efficiency = get_double("detector.efficiency");
  l.data_detector.dark_rate_hz = get_double("detector.dark_rate_hz");
  l.data_detector.gate_window_s = get_double("detector.gate_window_s");
  l.data_detector.dead_time_s = get_double("detector.dead_time_s");
  l.data_detector.efficiency_scale = get_double("detector.efficiency_scale");
  l.monitor_detector.efficiency = get_double("monitor.efficiency");
  l.monitor_detector.dark_rate_hz = get_double("monitor.dark_rate_hz");
  l.monitor_detector.gate_window_s = get_double("monitor.gate_window_s");
  l.monitor_detector.dead_time_s = get_double("monitor.dead_time_s");
  l.monitor_detector.efficiency_scale = get_double("detector.efficiency_scale");
  l.interferometer.intrinsic_visibility = get_double("interferometer.intrinsic_visibility");
  l.interferometer.phase_rad = get_double("interferometer.phase_rad");
  l.interferometer.phase_per_step_rad = get_double("interferometer.phase_per_step_rad");
  l.interferometer.drift_std_rad_per_sqrt_s =
      get_double("interferometer.drift_std_rad_per_sqrt_s");
  l.protocol.decoy_fraction = get_double("protocol.decoy_fraction");
  l.protocol.monitor_fraction = get_double("protocol.monitor_fraction");
  l.protocol.optical_error = get_double("protocol.optical_error");
  try {
    l.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return l;
}

DistillationParams ExperimentConfig::distillation() const {
  DistillationParams p;
  p.block_size = get_size("distillation.block_size");
  p.leak_efficiency = get_double("distillation.leak_efficiency");
  p.epsilon_pa = get_double("distillation.epsilon_pa");
  try {
    p.eve_bound = eve_bound_by_name(get("distillation.eve_bound"));
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return p;
}

AlignmentController ExperimentConfig::alignment() const {
  AlignmentController c;
  c.scan_range_steps = get_int("alignment.scan_range_steps");
  c.scan_step = get_int("alignment.scan_step");
  c.scan_dwell_s = get_double("alignment.scan_dwell_s");
  c.settle_time_s = get_double("alignment.settle_time_s");
  c.gain = get_double("alignment.gain");
  c.dither_steps = get_int("alignment.dither_steps");
  c.noise_duration_s = get_double("alignment.noise_duration_s");
  c.hold_duration_s = get_double("alignment.hold_duration_s");
  c.lock_duration_s = get_double("alignment.lock_duration_s");
  c.visibility_window_s = get_double("alignment.visibility_window_s");
  return c;
}

SessionConfig ExperimentConfig::session() const {
  SessionConfig s;
  s.block_size = get_size("distillation.block_size");
  s.epsilon_pa = get_double("distillation.epsilon_pa");
  s.eve_bound = get("distillation.eve_bound");
  s.n_blocks = get_size("session.n_blocks");
  s.bootstrap_key_bits = get_size("session.bootstrap_key_bits");
  s.tag_len = get_size("session.tag_len");
  s.initial_qber_estimate = get_double("session.initial_qber_estimate");
  s.cascade_passes = get_size("session.cascade_passes");
  const std::string& fb = get("session.visibility_fallback");
  if (fb == "floor") {
    s.visibility_fallback = VisibilityFallback::kFloor;
  } else if (fb == "abort") {
    s.visibility_fallback = VisibilityFallback::kAbort;
  } else {
    throw ConfigError("session.visibility_fallback must be 'floor' or 'abort'");
  }
  s.visibility_floor = get_double("session.visibility_floor");
  s.visibility_policy.min_counts = get_size("session.visibility_min_counts");
  s.visibility_policy.min_rate_hz = get_double("session.visibility_min_rate_hz");
  s.block_timeout_s = get_double("session.block_timeout_s");
  s.classical_latency_s = get_double("session.classical_latency_s");
  s.run_alignment = get_bool("session.run_alignment");
  s.alignment = alignment();
  s.alignment.lock_duration_s = get_double("session.align_lock_s");
  try {
    s.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return s;
}

std::vector<double> ExperimentConfig::sweep_lengths() const {
  std::vector<double> out;
  std::stringstream ss(get("sweep.lengths_km"));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const double v = parse_double("sweep.lengths_km", trim(item));
    if (!(v > 0.0)) {
      throw ConfigError("sweep.lengths_km: lengths must be positive");
    }
    if (!out.empty() && !(v > out.back())) {
      throw ConfigError("sweep.lengths_km: lengths must be strictly increasing");
    }
    out.push_back(v);
  }
  if (out.empty()) {
    throw ConfigError("sweep.lengths_km: no lengths given");
  }
  return out;
}

namespace {

std::string length_label(double km) {
  std::ostringstream s;
  s << std::setprecision(17) << km;
  return "sweep-" + s.str();
}

SweepRow sweep_row(const ExperimentConfig& config, double km, bool simulate, std::uint64_t slots,
                   const BitSource& root) {
  const LinkParams link = config.link(km);
  const DistillationParams dist = config.distillation();
  SweepRow row;
  row.length_km = km;
  row.total_loss_db = total_loss_db(link.fibre);
  const RatePrediction pred = analytic_rates(link, dist);
  row.analytic_qber = pred.qber;
  row.analytic_secret_rate = pred.secret_rate_hz;
  row.visibility = pred.expected_visibility;
  if (!simulate) {
    return row;
  }
  row.simulated = true;
  EventDrivenTransmission tx(link, root.fork(length_label(km)));
  const TransmissionChunk chunk = tx.next(slots);
  const SiftedBlock sifted = sift(chunk.frame, chunk.record);
  const std::size_t n = sifted.alice_bits.size();
  const double duration = static_cast<double>(slots) / link.source.bit_rate_hz();
  row.sim_qber = n > 0 ? static_cast<double>(sifted.alice_bits.hamming_distance(sifted.bob_bits)) /
                             static_cast<double>(n)
                       : std::numeric_limits<double>::quiet_NaN();

  const SessionConfig sc = config.session();
  double v = sc.visibility_floor;
  row.visibility = std::numeric_limits<double>::quiet_NaN();
  if (sifted.coherence.total() > 0) {
    const VisibilityEstimate est =
        estimate_visibility(sifted.coherence, duration, sc.visibility_policy);
    row.visibility = est.value;
    if (est.reliable) {
      v = est.value;
    }
  }
  if (n == 0) {
    row.sim_secret_rate = 0.0;
    return row;
  }
  // Per-block secret fraction at the measured error rate and visibility.
  const std::size_t block = dist.block_size;
  const auto leak = static_cast<std::size_t>(
      std::ceil(dist.leak_efficiency * static_cast<double>(block) * binary_entropy(row.sim_qber)));
  const std::size_t m =
      compute_secret_length(block, leak + dist.confirm_bits, v, dist.epsilon_pa, dist.eve_bound);
  row.sim_secret_rate = static_cast<double>(n) / duration * static_cast<double>(m) /
                        static_cast<double>(block);
  return row;
}

void write_number(std::ostream& out, double v) {
  if (std::isnan(v)) {
    out << "nan";
  } else {
    out << v;
  }
}

}  // namespace

std::vector<SweepRow> run_sweep(const ExperimentConfig& config) {
  const std::vector<double> lengths = config.sweep_lengths();
  const bool simulate = !config.get_bool("sweep.analytic_only");
  const std::uint64_t slots = config.get_size("sweep.slots");
  if (simulate && slots == 0) {
    throw ConfigError("sweep.slots must be positive for simulated sweeps");
  }
  const BitSource root(config.seed());
  config.link(lengths.front());  // surface config errors before spawning work
  config.session();
  std::vector<std::future<SweepRow>> jobs;
  for (double km : lengths) {
    jobs.push_back(std::async(std::launch::async, [&, km] {
      return sweep_row(config, km, simulate, slots, root);
    }));
  }
  std::vector<SweepRow> rows;
  for (auto& j : jobs) {
    rows.push_back(j.get());
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const ExperimentConfig& config,
                     const std::vector<SweepRow>& rows) {
  out << config.provenance_line() << '\n';
  out << "length_km,total_loss_db,analytic_qber,analytic_secret_rate,sim_qber,sim_secret_rate,"
         "visibility\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.length_km << ',' << r.total_loss_db << ',' << r.analytic_qber << ','
        << r.analytic_secret_rate << ',';
    if (r.simulated) {
      write_number(out, r.sim_qber);
      out << ',';
      write_number(out, r.sim_secret_rate);
    } else {
      out << ',';
    }
    out << ',';
    write_number(out, r.visibility);
    out << '\n';
  }
}

void write_predict_csv(std::ostream& out, const ExperimentConfig& config) {
  const LinkParams link = config.link();
  const RatePrediction p = analytic_rates(link, config.distillation());
  out << config.provenance_line() << '\n';
  out << "quantity,value\n" << std::setprecision(10);
  out << "length_km," << link.fibre.length_km << '\n';
  out << "total_loss_db," << total_loss_db(link.fibre) << '\n';
  out << "transmittance," << p.transmittance << '\n';
  out << "p_signal," << p.p_signal << '\n';
  out << "p_dark," << p.p_dark << '\n';
  out << "raw_click_rate_hz," << p.raw_click_rate_hz << '\n';
  out << "dead_time_factor," << p.dead_time_factor << '\n';
  out << "sifted_rate_hz," << p.sifted_rate_hz << '\n';
  out << "qber," << p.qber << '\n';
  out << "expected_visibility," << p.expected_visibility << '\n';
  out << "secret_fraction," << p.secret_fraction << '\n';
  out << "secret_rate_hz," << p.secret_rate_hz << '\n';
}

AlignmentTrace run_align(const ExperimentConfig& config) {
  const LinkParams link = config.link();
  BitSource src = BitSource(config.seed()).fork("alignment");
  try {
    return simulate_alignment(link, config.alignment(), src);
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
}

void write_align_csv(std::ostream& out, const ExperimentConfig& config,
                     const AlignmentTrace& trace) {
  out << config.provenance_line() << '\n';
  trace.write_csv(out);
}

SessionResult run_session(const ExperimentConfig& config) {
  return run_session(config.link(), config.session(), config.seed());
}

void write_session_csv(std::ostream& out, const ExperimentConfig& config,
                       const SessionReport& report) {
  out << config.provenance_line() << '\n';
  report.write_csv(out);
}

}  // namespace cowqkd
