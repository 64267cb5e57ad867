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

#ifndef IPF_KF_BANK_HPP
#define IPF_KF_BANK_HPP

#include <string_view>

#include "ipf/gaussian.hpp"
#include "ipf/models.hpp"

namespace ipf {

/// Predicted statistics of one particle's KF: the blocks of the Gaussian
/// approximation of p(x_k, y_k | x_{k-1}).
struct PredictedMoments {
  Vector m_bar;
  Matrix P_bar;
  Vector y_bar;
  Matrix P_y;
  Matrix P_xy;

  [[nodiscard]] JointMoments joint() const { return {m_bar, y_bar, P_bar, P_y, P_xy}; }
};

/// Scaled unscented transform parameters.
struct UtParams {
  double alpha_ut = 1.0;
  double beta_ut = 2.0;
  double kappa_ut = 0.0;

  [[nodiscard]] double lambda(int n) const noexcept { return alpha_ut * alpha_ut * (n + kappa_ut) - n; }
  /// Throws InvalidModelError unless alpha_ut in (0, 1] and n + lambda > 0.
  void validate(int n) const;
};

enum class KfBackend { kEkf, kUkf };

[[nodiscard]] std::string_view to_string(KfBackend backend) noexcept;

/// Central-difference Jacobian with step 1e-6 * max(1, |x_j|) per column.
/// Throws EvaluationError naming the input component on non-finite output.
[[nodiscard]] Matrix jacobian(const VectorMap& map, const Vector& x);

/// EKF prediction: m = f(x), P = F P F^T + Q, y = h(m), P_y = H P H^T + R,
/// P_xy = P H^T with F and H the model Jacobians at x and m.
[[nodiscard]] PredictedMoments ekf_predict(const Vector& x_prev, const Matrix& P_prev, const StateSpaceModel& model);

/// UKF prediction with 2n+1 sigma points. The measurement sigma points are
/// redrawn from (m_bar, P_bar).
[[nodiscard]] PredictedMoments ukf_predict(const Vector& x_prev, const Matrix& P_prev, const StateSpaceModel& model,
                                           const UtParams& ut = {});

[[nodiscard]] PredictedMoments kf_predict(KfBackend backend, const Vector& x_prev, const Matrix& P_prev,
                                          const StateSpaceModel& model, const UtParams& ut = {});

[[nodiscard]] GaussianMoments kf_update(const PredictedMoments& pred, const Vector& y);

/// log N(y; y_bar, P_y).
[[nodiscard]] double predictive_loglik(const PredictedMoments& pred, const Vector& y);

}  // namespace ipf

#endif  // IPF_KF_BANK_HPP
