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

#ifndef IPF_GAUSSIAN_HPP
#define IPF_GAUSSIAN_HPP

#include <Eigen/Cholesky>

#include "ipf/types.hpp"

namespace ipf {

struct GaussianMoments {
  Vector mean;
  Matrix cov;
};

/// Joint Gaussian of (x, y) in block form.
struct JointMoments {
  Vector mean_x;
  Vector mean_y;
  Matrix P_x;
  Matrix P_y;
  Matrix P_xy;
};

/// (P + P^T) / 2.
[[nodiscard]] Matrix symmetrize(const Matrix& P);

/// Lower Cholesky factor L with L L^T = A.
///
/// Unblocked column algorithm; faster than Eigen::LLT at the sizes used here.
class Cholesky {
 public:
  Cholesky() = default;
  /// Factors A (lower triangle read). Returns false if A is not numerically SPD.
  bool compute(const Matrix& A);
  [[nodiscard]] bool ok() const noexcept { return ok_; }
  [[nodiscard]] const Matrix& matrixL() const noexcept { return L_; }
  [[nodiscard]] Eigen::Index rows() const noexcept { return L_.rows(); }

  /// A^{-1} b.
  template <typename Rhs>
  [[nodiscard]] Matrix solve(const Eigen::MatrixBase<Rhs>& b) const {
    Matrix x = L_.triangularView<Eigen::Lower>().solve(b);
    L_.triangularView<Eigen::Lower>().transpose().solveInPlace(x);
    return x;
  }
  [[nodiscard]] Vector solve(const Vector& b) const {
    Vector x = L_.triangularView<Eigen::Lower>().solve(b);
    L_.triangularView<Eigen::Lower>().transpose().solveInPlace(x);
    return x;
  }
  /// log det A.
  [[nodiscard]] double log_det() const;

 private:
  Matrix L_;
  bool ok_ = false;
};

/// Cholesky factorization with the shared jitter policy.
///
/// P is symmetrized first. If the plain factorization fails, eps * trace(P)/n
/// is added to the diagonal with eps = 1e-12, 1e-11, ..., 1e-6. Throws
/// SpdRepairError carrying the last eps when every attempt fails.
[[nodiscard]] Cholesky spd_factor(const Matrix& P);

/// Lower-triangular L with L L^T = P (after the repair of spd_factor).
/// The zero matrix maps to the zero matrix.
[[nodiscard]] Matrix spd_sqrt(const Matrix& P);

/// Conditions the joint Gaussian on y:
///   mean = mean_x + P_xy P_y^{-1} (y - mean_y)
///   cov  = P_x - P_xy P_y^{-1} P_xy^T
/// using solves against the Cholesky factor of P_y. Throws ConditioningError.
[[nodiscard]] GaussianMoments conditional_update(const JointMoments& joint, const Vector& y);

[[nodiscard]] double gaussian_logpdf(const Vector& x, const GaussianMoments& moments);
/// Log density given a lower Cholesky factor of the covariance.
[[nodiscard]] double gaussian_logpdf_factored(const Vector& x, const Vector& mean, const Matrix& lower);

/// mean + spd_sqrt(cov) * xi.
[[nodiscard]] Vector gaussian_case_study_sample(const GaussianMoments& moments, const Vector& xi);

/// Sum of log|L_ii|.
[[nodiscard]] double log_det_lower(const Matrix& lower);

}  // namespace ipf

#endif  // IPF_GAUSSIAN_HPP
