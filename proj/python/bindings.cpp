// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cowqkd/distillation.hpp"
#include "cowqkd/experiment.hpp"
#include "cowqkd/photonic_model.hpp"
#include "cowqkd/toeplitz.hpp"

namespace py = pybind11;
using namespace cowqkd;

namespace {

ExperimentConfig make_config(const std::map<std::string, std::string>& overrides) {
  ExperimentConfig c;
  for (const auto& [k, v] : overrides) c.set(k, v);
  return c;
}

py::dict rates_dict(const RatePrediction& r) {
  py::dict d;
  d["transmittance"] = r.transmittance;
  d["p_signal"] = r.p_signal;
  d["p_dark"] = r.p_dark;
  d["p_sift_per_data_slot"] = r.p_sift_per_data_slot;
  d["raw_click_rate_hz"] = r.raw_click_rate_hz;
  d["dead_time_factor"] = r.dead_time_factor;
  d["sifted_rate_hz"] = r.sifted_rate_hz;
  d["qber"] = r.qber;
  d["expected_visibility"] = r.expected_visibility;
  d["secret_fraction"] = r.secret_fraction;
  d["secret_rate_hz"] = r.secret_rate_hz;
  return d;
}

template <class F>
std::string to_csv(F&& write) {
  std::ostringstream out;
  write(out);
  return out.str();
}

}  // namespace

PYBIND11_MODULE(_cowqkd, m) {
  m.doc() = "Coherent one-way QKD link simulator";

  // Translators are tried newest first, so register base classes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  auto parameter = py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", parameter.ptr());

  py::class_<ExperimentConfig>(m, "Config")
      .def(py::init(&make_config), py::arg("overrides") = std::map<std::string, std::string>{})
      .def("set", &ExperimentConfig::set)
      .def("get", &ExperimentConfig::get)
      .def("load_file", &ExperimentConfig::load_file)
      .def("serialize", &ExperimentConfig::serialize)
      .def("hash", &ExperimentConfig::hash)
      .def("provenance_line", &ExperimentConfig::provenance_line)
      .def("values", &ExperimentConfig::values);

  m.def("binary_entropy", &binary_entropy);
  m.def("eve_info_bound", &eve_info_bound);
  m.def("total_loss_db", [](double km) { return total_loss_db(default_link(km).fibre); });
  m.def("analytic_rates", [](const ExperimentConfig& c, py::object length_km) {
    const LinkParams l = length_km.is_none() ? c.link() : c.link(length_km.cast<double>());
    return rates_dict(analytic_rates(l, c.distillation()));
  }, py::arg("config"), py::arg("length_km") = py::none());
  m.def("toeplitz_hash", [](const std::string& seed, const std::string& input, std::size_t out_len) {
    return toeplitz_hash(BitVector::from_string(seed), BitVector::from_string(input), out_len).to_string();
  }, "Bits as '0'/'1' strings.");

  m.def("predict_csv", [](const ExperimentConfig& c) {
    return to_csv([&](std::ostream& o) { write_predict_csv(o, c); });
  });
  m.def("sweep_csv", [](const ExperimentConfig& c) {
    std::vector<SweepRow> rows;
    {
      py::gil_scoped_release release;
      rows = run_sweep(c);
    }
    return to_csv([&](std::ostream& o) { write_sweep_csv(o, c, rows); });
  });
  m.def("align_csv", [](const ExperimentConfig& c) {
    AlignmentTrace t;
    {
      py::gil_scoped_release release;
      t = run_align(c);
    }
    return py::make_tuple(to_csv([&](std::ostream& o) { write_align_csv(o, c, t); }), t.min_window_visibility);
  }, "Returns (csv, minimum windowed visibility).");
  m.def("session", [](const ExperimentConfig& c) {
    SessionResult r;
    {
      py::gil_scoped_release release;
      r = run_session(c);
    }
    py::dict d;
    d["csv"] = to_csv([&](std::ostream& o) { write_session_csv(o, c, r.report); });
    d["aborted"] = r.report.aborted();
    d["abort_reason"] = r.report.abort_reason;
    d["average_secret_rate_bps"] = r.report.average_secret_rate_bps;
    d["average_qber"] = r.report.average_qber;
    py::list keys;
    for (const auto& b : r.alice_store.blocks()) keys.append(b.bits.to_string());
    d["alice_keys"] = keys;
    py::list bob;
    for (const auto& b : r.bob_store.blocks()) bob.append(b.bits.to_string());
    d["bob_keys"] = bob;
    return d;
  });
}
