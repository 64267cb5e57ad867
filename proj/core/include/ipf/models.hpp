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

#ifndef IPF_MODELS_HPP
#define IPF_MODELS_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "ipf/rng.hpp"
#include "ipf/types.hpp"

namespace ipf {

using VectorMap = std::function<Vector(const Vector&)>;
using JacobianMap = std::function<Matrix(const Vector&)>;
using NoiseSampler = std::function<Vector(RandomStream&)>;
/// (x, c) -> sum_l c_l * Hessian(h_l)(x).
using CurvatureMap = std::function<Matrix(const Vector&, const Vector&)>;

/// Where model Jacobians come from.
enum class JacobianSource { kFiniteDifference, kAnalytic };

/// Discrete-time system x_{k+1} = f(x_k) + w_k, y_k = h(x_k) + v_k.
///
/// Q and R are the declared noise covariances that filters use. The samplers
/// draw from the true noise laws, which may be non-Gaussian; they are used
/// only for truth simulation.
class StateSpaceModel {
 public:
  /// Throws InvalidModelError when dimensions disagree or when Q or R is not
  /// symmetric positive definite (no jitter is applied here).
  StateSpaceModel(int n_x, int n_y, VectorMap f, VectorMap h, Matrix Q, Matrix R, NoiseSampler process_noise,
                  NoiseSampler measurement_noise);

  [[nodiscard]] int n_x() const noexcept { return n_x_; }
  [[nodiscard]] int n_y() const noexcept { return n_y_; }

  [[nodiscard]] Vector transition(const Vector& x) const { return f_(x); }
  [[nodiscard]] Vector measure(const Vector& x) const { return h_(x); }

  /// Analytic Jacobian when one was attached, central differences otherwise.
  [[nodiscard]] Matrix transition_jacobian(const Vector& x) const;
  [[nodiscard]] Matrix measurement_jacobian(const Vector& x) const;
  [[nodiscard]] bool has_analytic_measurement_jacobian() const noexcept { return static_cast<bool>(h_jacobian_); }
  [[nodiscard]] bool has_analytic_transition_jacobian() const noexcept { return static_cast<bool>(f_jacobian_); }

  void set_transition_jacobian(JacobianMap jac) { f_jacobian_ = std::move(jac); }
  void set_measurement_jacobian(JacobianMap jac) { h_jacobian_ = std::move(jac); }

  /// Optional second derivatives of h, used for Newton-corrected steps when
  /// minimizing implicit targets.
  void set_measurement_curvature(CurvatureMap curvature) { h_curvature_ = std::move(curvature); }
  [[nodiscard]] bool has_measurement_curvature() const noexcept { return static_cast<bool>(h_curvature_); }
  [[nodiscard]] Matrix measurement_curvature(const Vector& x, const Vector& weights) const {
    return h_curvature_(x, weights);
  }

  [[nodiscard]] const Matrix& Q() const noexcept { return Q_; }
  [[nodiscard]] const Matrix& R() const noexcept { return R_; }
  [[nodiscard]] const Eigen::LLT<Matrix>& Q_factor() const noexcept { return Q_llt_; }
  [[nodiscard]] const Eigen::LLT<Matrix>& R_factor() const noexcept { return R_llt_; }
  [[nodiscard]] const Matrix& Q_inverse() const noexcept { return Q_inv_; }
  // Inverse of the lower Cholesky factor of R.
  [[nodiscard]] const Matrix& R_whitener() const noexcept { return R_whiten_; }
  [[nodiscard]] double log_det_Q() const noexcept { return log_det_Q_; }
  [[nodiscard]] double log_det_R() const noexcept { return log_det_R_; }

  /// L_R^{-1} r and L_R^{-1} J, L_R the lower Cholesky factor of R.
  [[nodiscard]] Vector whiten_measurement(const Vector& r) const;
  [[nodiscard]] Matrix whiten_measurement(const Matrix& J) const;
  /// L_R^{-T} z.
  [[nodiscard]] Vector whiten_measurement_transpose(const Vector& z) const;
  /// L_Q^{-1} r.
  [[nodiscard]] Vector whiten_process(const Vector& r) const;
  [[nodiscard]] Vector apply_Q_inverse(const Vector& v) const;
  /// Q^{-1}, built from the diagonal when Q is diagonal.
  [[nodiscard]] Matrix Q_inverse_lower() const;

  [[nodiscard]] Vector sample_process_noise(RandomStream& rng) const { return w_(rng); }
  [[nodiscard]] Vector sample_measurement_noise(RandomStream& rng) const { return v_(rng); }

 private:
  int n_x_;
  int n_y_;
  VectorMap f_;
  VectorMap h_;
  JacobianMap f_jacobian_;
  JacobianMap h_jacobian_;
  CurvatureMap h_curvature_;
  Matrix Q_;
  Matrix R_;
  Eigen::LLT<Matrix> Q_llt_;
  Eigen::LLT<Matrix> R_llt_;
  Matrix Q_inv_;
  Matrix R_whiten_;
  // Set when Q (R) is exactly diagonal.
  bool q_diagonal_ = false;
  bool r_diagonal_ = false;
  Vector q_inv_diag_;
  Vector q_whiten_diag_;
  Vector r_whiten_diag_;
  double log_det_Q_ = 0.0;
  double log_det_R_ = 0.0;
  NoiseSampler w_;
  NoiseSampler v_;
};

/// Zero-mean Gaussian sampler with the given covariance.
[[nodiscard]] NoiseSampler gaussian_noise_sampler(const Matrix& cov);
/// i.i.d. U(-halfwidth, halfwidth) per component.
[[nodiscard]] NoiseSampler uniform_noise_sampler(int dim, double halfwidth);
[[nodiscard]] NoiseSampler zero_noise_sampler(int dim);

struct Lorenz96Config {
  int n_x = 40;
  double forcing = 5.0;
  double dt = 0.01;
  double noise_halfwidth = 0.5;

  /// Throws InvalidModelError on n_x < 4, dt <= 0 or a negative halfwidth.
  void validate() const;
  /// Variance of U(-a, a), i.e. a^2 / 3.
  [[nodiscard]] double noise_variance() const noexcept { return noise_halfwidth * noise_halfwidth / 3.0; }
  [[nodiscard]] int n_y() const noexcept { return n_x / 2; }
};

/// Lorenz'96 drift: dx_j/dt = (x_{j+1} - x_{j-2}) x_{j-1} - x_j + F, cyclic.
[[nodiscard]] Vector lorenz96_drift(const Vector& x, double forcing);
[[nodiscard]] Matrix lorenz96_drift_jacobian(const Vector& x);

/// One classical RK4 step of the Lorenz'96 drift. Deterministic; no noise.
[[nodiscard]] Vector rk4_step(const Vector& x, const Lorenz96Config& cfg);
/// Jacobian of rk4_step, chained through the four stages.
[[nodiscard]] Matrix rk4_step_jacobian(const Vector& x, const Lorenz96Config& cfg);

/// Observes every other component: y_l = x_{2l-1} + sin(x_{2l-1}) in 1-based
/// indexing, i.e. components 0, 2, 4, ... of the 0-based state.
[[nodiscard]] Vector lorenz96_measure(const Vector& x);
[[nodiscard]] Matrix lorenz96_measure_jacobian(const Vector& x);
/// sum_l c_l * Hessian(y_l)(x); diagonal, -c_l sin(x) on observed components.
[[nodiscard]] Matrix lorenz96_measure_curvature(const Vector& x, const Vector& weights);

struct Lorenz96ModelOptions {
  JacobianSource jacobian = JacobianSource::kFiniteDifference;
  /// When false the truth samplers return zeros; Q and R keep their declared values.
  bool truth_noise = true;
};

/// Lorenz'96 with RK4 transition, partial sine measurement, uniform noises
/// and Q = R = (halfwidth^2 / 3) I.
[[nodiscard]] StateSpaceModel make_lorenz96_model(const Lorenz96Config& cfg, const Lorenz96ModelOptions& options = {});

/// States x_0..x_T and measurements y_1..y_T.
struct Trajectory {
  std::vector<Vector> states;
  std::vector<Vector> measurements;
  std::uint64_t seed = 0;

  [[nodiscard]] int steps() const noexcept { return static_cast<int>(measurements.size()); }
};

/// x_{k+1} = f(x_k) + w_k and y_k = h(x_k) + v_k for k = 1..T.
///
/// Process and measurement noise come from disjoint streams derived from
/// `seed`, so the states do not depend on the measurements drawn.
[[nodiscard]] Trajectory simulate_truth(const StateSpaceModel& model, const Vector& x0, int steps,
                                        std::uint64_t seed);

/// F*1 plus a seeded N(0, I) perturbation, spun up by `spinup_steps`
/// noise-free RK4 steps so that the result lies on the attractor.
[[nodiscard]] Vector lorenz96_initial_state(const Lorenz96Config& cfg, std::uint64_t seed, int spinup_steps = 500);

/// Writes `trajectory.csv` (header `k,x_1..x_n,y_1..y_m`, 1-based names, y
/// columns empty at k = 0) and a `trajectory.json` sidecar with config and
/// seed into `dir`. Throws IoError.
void write_trajectory(const std::string& dir, const Trajectory& trajectory, const Lorenz96Config& cfg);

/// Reads back a trajectory written by write_trajectory.
[[nodiscard]] Trajectory read_trajectory(const std::string& dir);

}  // namespace ipf

#endif  // IPF_MODELS_HPP
