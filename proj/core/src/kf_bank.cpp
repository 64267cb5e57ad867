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

#include "ipf/kf_bank.hpp"

#include <cmath>
#include <string>

namespace ipf {

void UtParams::validate(int n) const {
  if (!(alpha_ut > 0.0 && alpha_ut <= 1.0)) {
    throw InvalidModelError("UT alpha must lie in (0, 1]");
  }
  if (!(n + lambda(n) > 0.0)) {
    throw InvalidModelError("UT parameters give n + lambda <= 0");
  }
}

std::string_view to_string(KfBackend backend) noexcept {
  return backend == KfBackend::kEkf ? "EKF" : "UKF";
}

Matrix jacobian(const VectorMap& map, const Vector& x) {
  const Eigen::Index n = x.size();
  Matrix J;
  Vector xp = x;
  Vector xm = x;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double delta = 1e-6 * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + delta;
    xm[j] = x[j] - delta;
    const Vector fp = map(xp);
    const Vector fm = map(xm);
    if (!fp.allFinite() || !fm.allFinite()) {
      throw EvaluationError("non-finite map output when perturbing component " + std::to_string(j),
                            static_cast<int>(j));
    }
    if (j == 0) {
      J.resize(fp.size(), n);
    }
    J.col(j) = (fp - fm) / (xp[j] - xm[j]);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return J;
}

PredictedMoments ekf_predict(const Vector& x_prev, const Matrix& P_prev, const StateSpaceModel& model) {
  PredictedMoments pred;
  const Matrix F = model.transition_jacobian(x_prev);
  pred.m_bar = model.transition(x_prev);
  const Matrix FP = F * P_prev;
  pred.P_bar = model.Q();
  pred.P_bar.triangularView<Eigen::Lower>() += FP * F.transpose();
  pred.P_bar.triangularView<Eigen::StrictlyUpper>() = pred.P_bar.transpose();

  const Matrix H = model.measurement_jacobian(pred.m_bar);
  pred.y_bar = model.measure(pred.m_bar);
  pred.P_xy = pred.P_bar * H.transpose();
  pred.P_y = symmetrize(H * pred.P_xy + model.R());
  return pred;
}

namespace {

struct SigmaWeights {
  double mean0;
  double cov0;
  double rest;
  double spread;
};

SigmaWeights sigma_weights(int n, const UtParams& ut) {
  const double lambda = ut.lambda(n);
  const double c = n + lambda;
  SigmaWeights w{};
  w.mean0 = lambda / c;
  w.cov0 = w.mean0 + (1.0 - ut.alpha_ut * ut.alpha_ut + ut.beta_ut);
  w.rest = 1.0 / (2.0 * c);
  w.spread = std::sqrt(c);
  return w;
}

// Columns: center, center + spread * L_i, center - spread * L_i.
Matrix sigma_points(const Vector& center, const Matrix& cov, double spread) {
  const Eigen::Index n = center.size();
  const Matrix scaled = spread * spd_sqrt(cov);
  Matrix pts(n, 2 * n + 1);
  pts.col(0) = center;
  for (Eigen::Index i = 0; i < n; ++i) {
    pts.col(1 + i) = center + scaled.col(i);
    pts.col(1 + n + i) = center - scaled.col(i);
  }
  return pts;
}

Matrix propagate(const Matrix& pts, const VectorMap& map) {
  Vector first = map(pts.col(0));
  Matrix out(first.size(), pts.cols());
  out.col(0) = std::move(first);
  for (Eigen::Index i = 1; i < pts.cols(); ++i) {
    out.col(i) = map(pts.col(i));
  }
  return out;
}

Vector weighted_mean(const Matrix& pts, const SigmaWeights& w) {
  const Eigen::Index cols = pts.cols();
  Vector mean = w.mean0 * pts.col(0);
  mean += w.rest * pts.rightCols(cols - 1).rowwise().sum();
  return mean;
}

Vector cov_weights(Eigen::Index cols, const SigmaWeights& w) {
  Vector wc = Vector::Constant(cols, w.rest);
  wc[0] = w.cov0;
  return wc;
}

}  // namespace

PredictedMoments ukf_predict(const Vector& x_prev, const Matrix& P_prev, const StateSpaceModel& model,
                             const UtParams& ut) {
  const int n = static_cast<int>(x_prev.size());
  ut.validate(n);
  const SigmaWeights w = sigma_weights(n, ut);
  const Vector wc = cov_weights(2 * n + 1, w);

  PredictedMoments pred;
  const Matrix X = propagate(sigma_points(x_prev, P_prev, w.spread), [&](const Vector& x) { return model.transition(x); });
  pred.m_bar = weighted_mean(X, w);
  const Matrix dX = X.colwise() - pred.m_bar;
  pred.P_bar = symmetrize(dX * wc.asDiagonal() * dX.transpose() + model.Q());

  const Matrix S = sigma_points(pred.m_bar, pred.P_bar, w.spread);
  const Matrix Z = propagate(S, [&](const Vector& x) { return model.measure(x); });
  pred.y_bar = weighted_mean(Z, w);
  const Matrix dS = S.colwise() - pred.m_bar;
  const Matrix dZ = Z.colwise() - pred.y_bar;
  const Matrix dZw = dZ * wc.asDiagonal();
  pred.P_y = symmetrize(dZw * dZ.transpose() + model.R());
  pred.P_xy = dS * dZw.transpose();
  return pred;
}

PredictedMoments kf_predict(KfBackend backend, const Vector& x_prev, const Matrix& P_prev,
                            const StateSpaceModel& model, const UtParams& ut) {
  return backend == KfBackend::kEkf ? ekf_predict(x_prev, P_prev, model) : ukf_predict(x_prev, P_prev, model, ut);
}

GaussianMoments kf_update(const PredictedMoments& pred, const Vector& y) {
  return conditional_update(pred.joint(), y);
}

double predictive_loglik(const PredictedMoments& pred, const Vector& y) {
  return gaussian_logpdf(y, GaussianMoments{pred.y_bar, pred.P_y});
}

}  // namespace ipf
