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

#ifndef IPF_BENCH_HPP
#define IPF_BENCH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ipf/filters.hpp"
#include "ipf/models.hpp"

namespace ipf {

struct FilterSpec {
  FilterKind kind = FilterKind::kUipf;
  int particles = 10;

  friend bool operator==(const FilterSpec&, const FilterSpec&) = default;
};

/// EPF(1000), E-IPF(1000), UPF(100), I-IPF(100), U-IPF(10).
[[nodiscard]] std::vector<FilterSpec> default_roster();

struct ExperimentConfig {
  Lorenz96Config model;
  int T = 500;
  int n_mc = 50;
  std::vector<FilterSpec> filters = default_roster();
  double alpha = 0.05;
  double resample_threshold_frac = 0.5;
  /// One entry broadcasts to every component; otherwise one per component.
  std::vector<double> init_bias = {1.0};
  /// P0 = init_spread * I.
  double init_spread = 1.0;
  std::uint64_t master_seed = 20220520;

  UtParams ut;
  double cov_inflation = 1.0;
  JacobianSource jacobian = JacobianSource::kFiniteDifference;
  LogJacobianMethod log_jacobian = LogJacobianMethod::kClosedForm;
  int spinup_steps = 500;

  /// Throws ConfigError.
  void validate() const;
  [[nodiscard]] Vector bias_vector() const;
  [[nodiscard]] FilterOptions filter_options() const;

  friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);
};

[[nodiscard]] std::string config_to_json(const ExperimentConfig& cfg);
/// Missing fields take their defaults; unknown fields and bad values throw ConfigError.
[[nodiscard]] ExperimentConfig config_from_json(const std::string& text);
[[nodiscard]] ExperimentConfig load_config(const std::string& path);

/// Per-step sqrt(mean_j (est_j - truth_j)^2). Throws ConfigError on shape mismatch.
[[nodiscard]] std::vector<double> rmse_series(const std::vector<Vector>& estimates, const std::vector<Vector>& truth);

/// Seeds of one run: the truth trajectory and the filter's random streams.
struct RunSeeds {
  std::uint64_t truth = 0;
  std::uint64_t filter = 0;
};

[[nodiscard]] RunSeeds seeds_from(std::uint64_t seed) noexcept;

/// Truth of one MC run, shared by every filter of that run.
struct TruthRun {
  Trajectory trajectory;
};

[[nodiscard]] TruthRun simulate_run_truth(const ExperimentConfig& cfg, const StateSpaceModel& model,
                                          std::uint64_t truth_seed);

struct RunResult {
  /// Estimates for k = 1..T.
  std::vector<Vector> estimates;
  std::vector<double> rmse;
  double seconds = 0.0;
  int resample_count = 0;
};

/// Runs one filter against a given truth. Throws FilterFatalError.
[[nodiscard]] RunResult run_filter(const ExperimentConfig& cfg, const StateSpaceModel& model, const FilterSpec& spec,
                                   const Trajectory& truth, std::uint64_t filter_seed, int threads = 1);

/// Simulates the truth from seeds.truth and runs the filter. Timing covers
/// filtering only.
[[nodiscard]] RunResult run_single(const ExperimentConfig& cfg, const FilterSpec& spec, const RunSeeds& seeds,
                                   int threads = 1);
[[nodiscard]] RunResult run_single(const ExperimentConfig& cfg, FilterKind kind, int particles, std::uint64_t seed,
                                   int threads = 1);

struct FilterReport {
  FilterSpec spec;
  std::string label;
  std::vector<double> rmse_mean;
  std::vector<double> rmse_std;
  /// Per successful run, in MC order.
  std::vector<std::vector<double>> rmse_runs;
  std::vector<double> run_seconds;
  double mean_seconds = 0.0;
  std::vector<std::uint64_t> seeds;
  int failures = 0;
  /// More than 10% of runs failed.
  bool failed = false;
};

struct RunReport {
  ExperimentConfig config;
  std::vector<std::uint64_t> truth_seeds;
  std::vector<FilterReport> filters;
  int threads = 1;

  [[nodiscard]] bool any_failed() const;
};

/// Seed of filter `filter_index` in MC run `run`.
[[nodiscard]] std::uint64_t filter_run_seed(std::uint64_t master_seed, std::size_t filter_index, int run) noexcept;
[[nodiscard]] std::uint64_t truth_run_seed(std::uint64_t master_seed, int run) noexcept;

/// n_mc runs per filter. Runs execute on up to `threads` workers; numeric
/// output does not depend on the thread count.
[[nodiscard]] RunReport run_monte_carlo(const ExperimentConfig& cfg, int threads = 1);

/// Mean and population standard deviation across runs, per step.
void aggregate_rmse(FilterReport& report);

/// Unique column label per roster entry: the kind name, plus "(N)" when the
/// same kind appears more than once.
[[nodiscard]] std::vector<std::string> filter_labels(const std::vector<FilterSpec>& specs);

/// Writes rmse.csv, timing.csv and report.json into `dir`. Throws IoError.
void emit_report(const RunReport& report, const std::string& dir);

/// Config echoed in a report.json.
[[nodiscard]] ExperimentConfig read_report_config(const std::string& path);

/// rmse.csv contents.
[[nodiscard]] std::string rmse_csv(const RunReport& report);
[[nodiscard]] std::string timing_csv(const RunReport& report);

}  // namespace ipf

#endif  // IPF_BENCH_HPP
