// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

// cowqkd: link budget predictions, distance sweeps, alignment traces and
// full key-exchange sessions, written as CSV.

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "cowqkd/errors.hpp"
#include "cowqkd/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitAbort = 3;
constexpr int kExitIo = 4;

struct Options {
  std::string config_path;
  std::string seed;
  std::string out;
  std::string save_config;
  std::uint64_t slots = 0;
  bool analytic_only = false;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_path, "key = value config file");
  cmd->add_option("--seed", o.seed, "seed as hex (overrides run.seed)");
  cmd->add_option("--out", o.out, "output CSV path (default: stdout)");
  cmd->add_option("--save-config", o.save_config, "write the effective config here");
  cmd->allow_extras();
}

cowqkd::ExperimentConfig build_config(const Options& o, const std::vector<std::string>& extras) {
  cowqkd::ExperimentConfig cfg;
  if (!o.config_path.empty()) {
    cfg.load_file(o.config_path);
  }
  for (const auto& arg : extras) {
    const auto eq = arg.find('=');
    if (arg.rfind("--", 0) != 0 || eq == std::string::npos) {
      throw cowqkd::ConfigError("unrecognised argument '" + arg +
                                "' (overrides look like --section.key=value)");
    }
    cfg.set(arg.substr(2, eq - 2), arg.substr(eq + 1));
  }
  if (!o.seed.empty()) {
    cfg.set("run.seed", o.seed);
  }
  if (o.slots > 0) {
    cfg.set("sweep.slots", std::to_string(o.slots));
  }
  if (o.analytic_only) {
    cfg.set("sweep.analytic_only", "true");
  }
  cfg.seed();  // validate early
  if (!o.save_config.empty()) {
    std::ofstream f(o.save_config);
    f << cfg.serialize();
    if (!f) {
      throw cowqkd::IoError("cannot write " + o.save_config);
    }
  }
  return cfg;
}

void with_output(const std::string& path, const std::function<void(std::ostream&)>& body) {
  if (path.empty()) {
    body(std::cout);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw cowqkd::IoError("cannot write " + path);
  }
  body(f);
  f.close();
  if (!f) {
    throw cowqkd::IoError("error writing " + path);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coherent one-way QKD link simulator"};
  app.require_subcommand(1);
  Options o;

  auto* sweep = app.add_subcommand("sweep", "analytic and simulated rates versus fibre length");
  add_common(sweep, o);
  sweep->add_option("--slots", o.slots, "simulated slots per length");
  sweep->add_flag("--analytic-only", o.analytic_only, "skip the simulated columns");

  auto* session = app.add_subcommand("session", "full key exchange, block by block");
  add_common(session, o);

  auto* align = app.add_subcommand("align", "interferometer scan and lock trace");
  add_common(align, o);

  auto* predict = app.add_subcommand("predict", "analytic rates at fibre.length_km");
  add_common(predict, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    const cowqkd::ExperimentConfig cfg = build_config(o, cmd->remaining());

    if (cmd == sweep) {
      const auto rows = cowqkd::run_sweep(cfg);
      with_output(o.out, [&](std::ostream& out) { cowqkd::write_sweep_csv(out, cfg, rows); });
    } else if (cmd == predict) {
      with_output(o.out, [&](std::ostream& out) { cowqkd::write_predict_csv(out, cfg); });
    } else if (cmd == align) {
      const auto trace = cowqkd::run_align(cfg);
      with_output(o.out, [&](std::ostream& out) { cowqkd::write_align_csv(out, cfg, trace); });
      std::cerr << "visibility " << trace.visibility << ", minimum windowed "
                << trace.min_window_visibility << '\n';
    } else {
      const auto result = cowqkd::run_session(cfg);
      with_output(o.out, [&](std::ostream& out) {
        cowqkd::write_session_csv(out, cfg, result.report);
      });
      if (!o.out.empty()) {
        with_output(o.out + ".transcript.bin",
                    [&](std::ostream& out) { cowqkd::write_transcript(out, result.transcript); });
        with_output(o.out + ".transcript.csv", [&](std::ostream& out) {
          out << cfg.provenance_line() << '\n';
          cowqkd::write_transcript_ledger(out, result.transcript);
        });
      }
      result.report.write_summary(o.out.empty() ? std::cerr : std::cout);
      if (result.report.aborted()) {
        return kExitAbort;
      }
    }
  } catch (const cowqkd::IoError& e) {
    std::cerr << "cowqkd: " << e.what() << '\n';
    return kExitIo;
  } catch (const cowqkd::ParameterError& e) {
    std::cerr << "cowqkd: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const cowqkd::Error& e) {
    std::cerr << "cowqkd: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
