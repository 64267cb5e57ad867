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

#ifndef IPF_FILTERS_HPP
#define IPF_FILTERS_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ipf/implicit.hpp"
#include "ipf/kf_bank.hpp"
#include "ipf/models.hpp"
#include "ipf/rng.hpp"

namespace ipf {

struct Particle {
  Vector state;
  /// Log of the normalized weight; -inf marks a dead particle.
  double log_weight = 0.0;
  /// Per-particle covariance carried between KF steps.
  Matrix cov;
};

struct StepDiagnostics {
  double ess = 0.0;
  bool resampled = false;
  int failed_particles = 0;
};

struct Ensemble {
  std::vector<Particle> particles;
  int step = 0;
  StepDiagnostics diagnostics;

  [[nodiscard]] std::size_t size() const noexcept { return particles.size(); }
  [[nodiscard]] std::vector<double> weights() const;
};

enum class FilterKind { kEpf, kUpf, kEipf, kUipf, kIipf };

/// "EPF", "UPF", "E-IPF", "U-IPF", "I-IPF".
[[nodiscard]] std::string_view to_string(FilterKind kind) noexcept;
[[nodiscard]] std::optional<FilterKind> parse_filter_kind(std::string_view name) noexcept;

struct FilterOptions {
  /// Variance scale of the N(0, alpha I) reference.
  double alpha = 0.05;
  UtParams ut;
  /// Resample when ESS < frac * N; frac >= 1 resamples every step.
  double resample_threshold_frac = 0.5;
  /// Multiplicative inflation of the carried covariance (1 = none).
  double cov_inflation = 1.0;
  /// Worker threads for the per-particle bank.
  int threads = 1;
  MinimizeOptions minimize;
  RandomMapOptions random_map;

  void validate() const;
};

[[nodiscard]] Ensemble init_ensemble(int num_particles, const Vector& x0_est, const Matrix& P0, std::uint64_t seed);

/// E-IPF / U-IPF step. Each particle runs a KF prediction and update from its
/// own (x, P), is moved to m + sqrt(P~) xi with xi ~ N(0, alpha I), and is
/// reweighted by its predictive likelihood. Randomness comes from per-(step,
/// particle) streams derived from `seed`.
[[nodiscard]] Ensemble kf_ipf_step(const Ensemble& ens, const Vector& y, const StateSpaceModel& model,
                                   KfBackend backend, const FilterOptions& options, std::uint64_t seed);

/// EPF / UPF step: full draw from the per-particle KF posterior, weighted by
/// likelihood times transition over proposal.
[[nodiscard]] Ensemble kf_pf_step(const Ensemble& ens, const Vector& y, const StateSpaceModel& model,
                                  KfBackend backend, const FilterOptions& options, std::uint64_t seed);

[[nodiscard]] inline Ensemble ekf_pf_step(const Ensemble& ens, const Vector& y, const StateSpaceModel& model,
                                          const FilterOptions& options, std::uint64_t seed) {
  return kf_pf_step(ens, y, model, KfBackend::kEkf, options, seed);
}
[[nodiscard]] inline Ensemble ukf_pf_step(const Ensemble& ens, const Vector& y, const StateSpaceModel& model,
                                          const FilterOptions& options, std::uint64_t seed) {
  return kf_pf_step(ens, y, model, KfBackend::kUkf, options, seed);
}

/// Iterative implicit particle filter step: minimize F_i, solve the random
/// map, weight by |J| exp(-phi). The carried covariance is H^{-1} at the mode
/// (diagnostic only).
[[nodiscard]] Ensemble iipf_step(const Ensemble& ens, const Vector& y, const StateSpaceModel& model,
                                 const FilterOptions& options, std::uint64_t seed);

/// 1 / sum w_i^2.
[[nodiscard]] double ess(std::span<const double> weights);

/// Copy counts of systematic resampling with positions (i + offset) / N.
[[nodiscard]] std::vector<int> systematic_resample_indices(std::span<const double> weights, double offset);

/// Systematic resampling. Covariances travel with their states; all log
/// weights are reset to -log N.
[[nodiscard]] Ensemble systematic_resample(const Ensemble& ens, RandomStream& rng);

/// sum_i w_i x_i.
[[nodiscard]] Vector estimate(const Ensemble& ens);

/// One interface over all five filters.
class Filter {
 public:
  Filter(FilterKind kind, const StateSpaceModel& model, FilterOptions options);

  [[nodiscard]] FilterKind kind() const noexcept { return kind_; }
  [[nodiscard]] const FilterOptions& options() const noexcept { return options_; }

  /// Advances the ensemble by one measurement. `seed` identifies the run;
  /// the step index is taken from the ensemble.
  [[nodiscard]] Ensemble step(const Ensemble& ens, const Vector& y, std::uint64_t seed) const;

 private:
  FilterKind kind_;
  const StateSpaceModel* model_;
  FilterOptions options_;
};

/// JSON snapshot: step, particle states, log weights (null for -inf) and the
/// lower Cholesky factors of the per-particle covariances.
[[nodiscard]] std::string ensemble_to_json(const Ensemble& ens);
[[nodiscard]] Ensemble ensemble_from_json(std::string_view text);

}  // namespace ipf

#endif  // IPF_FILTERS_HPP
