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

#ifndef IPF_IMPLICIT_HPP
#define IPF_IMPLICIT_HPP

#include <span>
#include <vector>

#include "ipf/gaussian.hpp"
#include "ipf/kf_bank.hpp"
#include "ipf/models.hpp"
#include "ipf/rng.hpp"

namespace ipf {

/// Draws reference samples from N(0, alpha I).
///
/// alpha = 0 is accepted and yields the zero vector, which is the
/// deterministic limit used to collapse particles onto their KF means.
class ReferenceSampler {
 public:
  ReferenceSampler(int dim, double alpha);

  [[nodiscard]] int dim() const noexcept { return dim_; }
  [[nodiscard]] double alpha() const noexcept { return alpha_; }

  [[nodiscard]] Vector sample(RandomStream& rng) const;

 private:
  int dim_;
  double alpha_;
};

[[nodiscard]] inline Vector sample_reference(const ReferenceSampler& sampler, RandomStream& rng) {
  return sampler.sample(rng);
}

/// mean + spd_sqrt(cov) * xi.
[[nodiscard]] Vector map_particle(const GaussianMoments& moments, const Vector& xi);

/// Unnormalized KF-IPF log weight: w_prev_log + log N(y; y_bar, P_y).
/// Throws DegeneracyError on a non-finite likelihood.
[[nodiscard]] double ipf_log_weight(double w_prev_log, const PredictedMoments& pred, const Vector& y);

/// Normalized weights from log weights via log-sum-exp. -inf maps to 0.
/// Throws DegeneracyError when no entry is finite.
[[nodiscard]] std::vector<double> normalize_weights(std::span<const double> log_weights);

/// log of normalize_weights, computed without leaving log space.
[[nodiscard]] std::vector<double> normalize_log_weights(std::span<const double> log_weights);

/// log(|J| exp(-min F + min s)) for the Gaussian factor N(mean, cov) mapped
/// from a standard normal reference. Zero for every SPD covariance.
[[nodiscard]] double gaussian_implicit_log_weight_factor(const GaussianMoments& moments);

/// F(X) = -log(p(y | X) p(X | x_prev)) with Gaussian surrogates N(h(X), R)
/// and N(f(x_prev), Q), normalizing constants included.
class LogTarget {
 public:
  LogTarget(const StateSpaceModel& model, Vector x_prev, Vector y);

  [[nodiscard]] int dim() const noexcept { return model_->n_x(); }
  [[nodiscard]] const Vector& prior_mean() const noexcept { return prior_mean_; }
  [[nodiscard]] const Vector& observation() const noexcept { return y_; }
  [[nodiscard]] const StateSpaceModel& model() const noexcept { return *model_; }

  [[nodiscard]] double eval(const Vector& X) const;
  [[nodiscard]] Vector grad(const Vector& X) const;
  /// d . grad F(X). Uses J_h d from the analytic measurement Jacobian when the
  /// model has one, a central directional difference of h otherwise.
  [[nodiscard]] double directional_derivative(const Vector& X, const Vector& d) const;
  /// Gauss-Newton Hessian J_h^T R^{-1} J_h + Q^{-1}.
  [[nodiscard]] Matrix gauss_newton_hessian(const Vector& X) const;

 private:
  const StateSpaceModel* model_;
  Vector x_prev_;
  Vector y_;
  Vector prior_mean_;
  double log_normalizer_;
};

struct MinimizeOptions {
  double gradient_tolerance = 1e-8;
  int max_iterations = 100;
  double armijo_c = 1e-4;
};

/// Mode of a LogTarget.
struct TargetMinimum {
  Vector mu;
  double phi = 0.0;
  /// Gauss-Newton Hessian at mu.
  Matrix hessian;
  int iterations = 0;
  bool converged = false;
};

/// Gauss-Newton with Armijo backtracking (step halving). When the model
/// supplies measurement curvature and the resulting Newton matrix is SPD, the
/// step uses it; otherwise it is the plain Gauss-Newton step. The returned
/// Hessian is always the Gauss-Newton one. A non-converged result still
/// carries the best iterate and its value.
[[nodiscard]] TargetMinimum minimize_log_target(const LogTarget& target, const Vector& x_init,
                                                const MinimizeOptions& options = {});

enum class LogJacobianMethod {
  /// Matrix determinant lemma on the radial map.
  kClosedForm,
  /// Central differences of the full map xi -> X.
  kFiniteDifference,
};

struct RandomMapOptions {
  double residual_tolerance = 1e-10;
  double lambda_max = 1e6;
  int max_iterations = 200;
  LogJacobianMethod log_jacobian = LogJacobianMethod::kClosedForm;
};

struct ImplicitSolution {
  Vector x;
  double phi = 0.0;
  double log_jacobian = 0.0;
  double lambda = 0.0;
  /// F(x) - phi - rho at the returned point.
  double residual = 0.0;
  /// H^{-1} at the mode.
  Matrix mode_covariance;
  int iterations = 0;
  bool converged = false;
};

/// Solves F(mu + lambda L xi) - phi = |xi|^2 / (2 alpha) for lambda > 0, with
/// L = spd_sqrt(H^{-1}) and H the Gauss-Newton Hessian at mu. Throws
/// MapSolveError when no sign change is found below lambda_max.
[[nodiscard]] ImplicitSolution random_map_solve(const LogTarget& target, const TargetMinimum& minimum,
                                                const Vector& xi, double alpha, const RandomMapOptions& options = {});

}  // namespace ipf

#endif  // IPF_IMPLICIT_HPP
