// Copyright 2026 The ipf Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: simulate a truth trajectory, run one filter, or
// run the full Monte Carlo comparison.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ipf/bench.hpp"
#include "ipf/parallel.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kFilterFatal = 3,
  kIoError = 4,
};

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
  const ipf::ExperimentConfig cfg = ipf::load_config(config_path);
  const ipf::StateSpaceModel model = ipf::make_lorenz96_model(cfg.model);
  const ipf::RunSeeds seeds = ipf::seeds_from(cfg.master_seed);
  const ipf::TruthRun truth = ipf::simulate_run_truth(cfg, model, seeds.truth);
  ipf::write_trajectory(out_dir, truth.trajectory, cfg.model);
  std::cout << "wrote " << truth.trajectory.steps() << " steps to " << out_dir << "\n";
  return kOk;
}

int cmd_run(const std::string& config_path, const std::string& filter_name, int particles, std::uint64_t seed,
            const std::string& out_dir) {
  ipf::ExperimentConfig cfg = ipf::load_config(config_path);
  const auto kind = ipf::parse_filter_kind(filter_name);
  if (!kind) {
    throw ipf::ConfigError("unknown filter kind '" + filter_name + "'");
  }
  if (particles < 1) {
    throw ipf::ConfigError("--particles must be at least 1");
  }
  const ipf::FilterSpec spec{*kind, particles};
  cfg.n_mc = 1;
  cfg.filters = {spec};

  const ipf::RunSeeds seeds = ipf::seeds_from(seed);
  const ipf::RunResult result = ipf::run_single(cfg, spec, seeds, ipf::default_thread_count());

  ipf::RunReport report;
  report.config = cfg;
  report.threads = ipf::default_thread_count();
  report.truth_seeds = {seeds.truth};
  ipf::FilterReport fr;
  fr.spec = spec;
  fr.label = std::string(ipf::to_string(spec.kind));
  fr.seeds = {seeds.filter};
  fr.rmse_runs = {result.rmse};
  fr.run_seconds = {result.seconds};
  fr.mean_seconds = result.seconds;
  ipf::aggregate_rmse(fr);
  report.filters.push_back(std::move(fr));
  ipf::emit_report(report, out_dir);

  std::ofstream est(std::filesystem::path(out_dir) / "estimates.csv");
  if (!est) {
    throw ipf::IoError("cannot open for writing", (std::filesystem::path(out_dir) / "estimates.csv").string());
  }
  est << "k";
  for (int j = 1; j <= cfg.model.n_x; ++j) {
    est << ",xhat_" << j;
  }
  est << "\n";
  est.precision(17);
  for (std::size_t k = 0; k < result.estimates.size(); ++k) {
    est << (k + 1);
    for (Eigen::Index j = 0; j < result.estimates[k].size(); ++j) {
      est << "," << result.estimates[k][j];
    }
    est << "\n";
  }

  double tail = 0.0;
  const std::size_t from = result.rmse.size() > 100 ? result.rmse.size() - 100 : 0;
  for (std::size_t k = from; k < result.rmse.size(); ++k) {
    tail += result.rmse[k];
  }
  if (result.rmse.size() > from) {
    tail /= static_cast<double>(result.rmse.size() - from);
  }
  std::cout << filter_name << "(" << particles << "): final-window RMSE " << tail << ", " << result.seconds << " s\n";
  return kOk;
}

int cmd_compare(const std::string& config_path, const std::string& out_dir) {
  const ipf::ExperimentConfig cfg = ipf::load_config(config_path);
  const ipf::RunReport report = ipf::run_monte_carlo(cfg, ipf::default_thread_count());
  ipf::emit_report(report, out_dir);
  for (const ipf::FilterReport& f : report.filters) {
    std::cout << f.label << " N=" << f.spec.particles << " mean_seconds=" << f.mean_seconds
              << " failures=" << f.failures << (f.failed ? " FAILED" : "") << "\n";
  }
  return report.any_failed() ? kFilterFatal : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Implicit particle filtering via banks of nonlinear Kalman filters"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string filter_name;
  int particles = 0;
  std::uint64_t seed = 0;

  auto* simulate = app.add_subcommand("simulate", "Emit a truth trajectory");
  simulate->add_option("--config", config_path, "Experiment config (JSON)")->required();
  simulate->add_option("--out", out_dir, "Output directory")->required();

  auto* run = app.add_subcommand("run", "Run one filter once");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--filter", filter_name, "EPF, UPF, E-IPF, U-IPF or I-IPF")->required();
  run->add_option("--particles", particles, "Number of particles")->required();
  run->add_option("--seed", seed, "Run seed")->required();
  run->add_option("--out", out_dir, "Output directory")->required();

  auto* compare = app.add_subcommand("compare", "Monte Carlo comparison of the configured filters");
  compare->add_option("--config", config_path, "Experiment config (JSON)")->required();
  compare->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (simulate->parsed()) {
      return cmd_simulate(config_path, out_dir);
    }
    if (run->parsed()) {
      return cmd_run(config_path, filter_name, particles, seed, out_dir);
    }
    return cmd_compare(config_path, out_dir);
  } catch (const ipf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ipf::InvalidModelError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ipf::FilterFatalError& e) {
    std::cerr << "filter failed: " << e.what() << "\n";
    return kFilterFatal;
  } catch (const ipf::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFilterFatal;
  }
}
