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

#include "ipf/gaussian.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace ipf {

namespace {

constexpr double kFirstJitter = 1e-12;
constexpr int kJitterAttempts = 7;

void require_square(const Matrix& P) {
  if (P.rows() != P.cols()) {
    throw SpdRepairError("matrix is not square", 0.0);
  }
}

}  // namespace

Matrix symmetrize(const Matrix& P) { return 0.5 * (P + P.transpose()); }

bool Cholesky::compute(const Matrix& A) {
  const Eigen::Index n = A.rows();
  L_ = A;
  ok_ = false;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double d2 = L_(j, j) - L_.row(j).head(j).squaredNorm();
    if (!(d2 > 0.0) || !std::isfinite(d2)) {
      return false;
    }
    const double d = std::sqrt(d2);
    L_(j, j) = d;
    const Eigen::Index rest = n - j - 1;
    if (rest > 0) {
      L_.col(j).tail(rest).noalias() -= L_.bottomLeftCorner(rest, j) * L_.row(j).head(j).transpose();
      L_.col(j).tail(rest) /= d;
    }
  }
  L_.triangularView<Eigen::StrictlyUpper>().setZero();
  ok_ = true;
  return true;
}

double Cholesky::log_det() const { return 2.0 * L_.diagonal().array().log().sum(); }

Cholesky spd_factor(const Matrix& P) {
  require_square(P);
  const Matrix S = symmetrize(P);
  if (!S.allFinite()) {
    throw SpdRepairError("matrix has non-finite entries", 0.0);
  }
  Cholesky chol;
  if (chol.compute(S)) {
    return chol;
  }
  const double scale = S.trace() / static_cast<double>(S.rows());
  if (!(scale > 0.0)) {
    throw SpdRepairError("matrix has non-positive trace", 0.0);
  }
  double eps = kFirstJitter;
  for (int attempt = 0; attempt < kJitterAttempts; ++attempt) {
    eps = kFirstJitter * std::pow(10.0, attempt);
    Matrix jittered = S;
    jittered.diagonal().array() += eps * scale;
    if (chol.compute(jittered)) {
      return chol;
    }
  }
  throw SpdRepairError("Cholesky failed after jitter " + std::to_string(eps), eps);
}

Matrix spd_sqrt(const Matrix& P) {
  require_square(P);
  if (P.isZero(0.0)) {
    return Matrix::Zero(P.rows(), P.cols());
  }
  return spd_factor(P).matrixL();
}

GaussianMoments conditional_update(const JointMoments& joint, const Vector& y) {
  Cholesky llt;
  try {
    llt = spd_factor(joint.P_y);
  } catch (const SpdRepairError& e) {
    throw ConditioningError(std::string("innovation covariance: ") + e.what());
  }
  GaussianMoments out;
  out.mean = joint.mean_x + joint.P_xy * llt.solve(y - joint.mean_y);
  const Matrix gain_t = llt.solve(joint.P_xy.transpose());
  out.cov = symmetrize(joint.P_x - joint.P_xy * gain_t);
  return out;
}

double log_det_lower(const Matrix& lower) { return lower.diagonal().array().abs().log().sum(); }

double gaussian_logpdf_factored(const Vector& x, const Vector& mean, const Matrix& lower) {
  const double n = static_cast<double>(x.size());
  const Vector z = lower.triangularView<Eigen::Lower>().solve(x - mean);
  return -0.5 * n * std::log(2.0 * std::numbers::pi) - log_det_lower(lower) - 0.5 * z.squaredNorm();
}

double gaussian_logpdf(const Vector& x, const GaussianMoments& moments) {
  const Cholesky chol = spd_factor(moments.cov);
  return gaussian_logpdf_factored(x, moments.mean, chol.matrixL());
}

Vector gaussian_case_study_sample(const GaussianMoments& moments, const Vector& xi) {
  return moments.mean + spd_sqrt(moments.cov) * xi;
}

}  // namespace ipf
