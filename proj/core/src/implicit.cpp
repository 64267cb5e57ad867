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

#include "ipf/implicit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/LU>

namespace ipf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kDegenerateXiNorm = 1e-14;

struct ShiftedSum {
  double max_lw;
  double sum;
};

// Sum of exp(lw - max) over the finite entries.
ShiftedSum shifted_sum(std::span<const double> log_weights) {
  double max_lw = kNegInf;
  for (double lw : log_weights) {
    if (std::isfinite(lw)) {
      max_lw = std::max(max_lw, lw);
    }
  }
  if (!std::isfinite(max_lw)) {
    throw DegeneracyError("all importance weights are zero");
  }
  double sum = 0.0;
  for (double lw : log_weights) {
    if (std::isfinite(lw)) {
      sum += std::exp(lw - max_lw);
    }
  }
  return {max_lw, sum};
}

}  // namespace

ReferenceSampler::ReferenceSampler(int dim, double alpha) : dim_(dim), alpha_(alpha) {
  if (dim < 1) {
    throw InvalidModelError("reference dimension must be positive");
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw InvalidModelError("reference alpha must be non-negative");
  }
}

Vector ReferenceSampler::sample(RandomStream& rng) const {
  Vector xi = rng.normal_vector(dim_);
  return std::sqrt(alpha_) * xi;
}

Vector map_particle(const GaussianMoments& moments, const Vector& xi) {
  return gaussian_case_study_sample(moments, xi);
}

double ipf_log_weight(double w_prev_log, const PredictedMoments& pred, const Vector& y) {
  const double loglik = predictive_loglik(pred, y);
  if (!std::isfinite(loglik)) {
    throw DegeneracyError("non-finite predictive likelihood");
  }
  return w_prev_log + loglik;
}

std::vector<double> normalize_log_weights(std::span<const double> log_weights) {
  const ShiftedSum total = shifted_sum(log_weights);
  const double log_sum = std::log(total.sum);
  std::vector<double> out(log_weights.size());
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    out[i] = std::isfinite(log_weights[i]) ? (log_weights[i] - total.max_lw) - log_sum : kNegInf;
  }
  return out;
}

std::vector<double> normalize_weights(std::span<const double> log_weights) {
  const ShiftedSum total = shifted_sum(log_weights);
  std::vector<double> w(log_weights.size());
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    w[i] = std::isfinite(log_weights[i]) ? std::exp(log_weights[i] - total.max_lw) / total.sum : 0.0;
  }
  return w;
}

double gaussian_implicit_log_weight_factor(const GaussianMoments& moments) {
  const double n = static_cast<double>(moments.mean.size());
  const Matrix lower = spd_sqrt(moments.cov);
  const double log_abs_det_j = log_det_lower(lower);
  // min F = -log N(mean; mean, cov), min s = -log N(0; 0, I).
  const double min_f = 0.5 * n * std::log(2.0 * std::numbers::pi) + log_abs_det_j;
  const double min_s = 0.5 * n * std::log(2.0 * std::numbers::pi);
  return log_abs_det_j - min_f + min_s;
}

LogTarget::LogTarget(const StateSpaceModel& model, Vector x_prev, Vector y)
    : model_(&model), x_prev_(std::move(x_prev)), y_(std::move(y)) {
  if (x_prev_.size() != model.n_x() || y_.size() != model.n_y()) {
    throw InvalidModelError("log target dimensions do not match the model");
  }
  prior_mean_ = model.transition(x_prev_);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  log_normalizer_ = 0.5 * (model.n_x() * log2pi + model.log_det_Q()) + 0.5 * (model.n_y() * log2pi + model.log_det_R());
}

double LogTarget::eval(const Vector& X) const {
  const Vector ry = y_ - model_->measure(X);
  const Vector rx = X - prior_mean_;
  const Vector zy = model_->whiten_measurement(ry);
  const Vector zx = model_->whiten_process(rx);
  return 0.5 * zy.squaredNorm() + 0.5 * zx.squaredNorm() + log_normalizer_;
}

Vector LogTarget::grad(const Vector& X) const {
  const Vector ry = y_ - model_->measure(X);
  const Matrix J = model_->measurement_jacobian(X);
  return -J.transpose() * model_->R_factor().solve(ry) + model_->apply_Q_inverse(X - prior_mean_);
}

double LogTarget::directional_derivative(const Vector& X, const Vector& d) const {
  const Vector ry = y_ - model_->measure(X);
  Vector jd;
  if (model_->has_analytic_measurement_jacobian()) {
    jd = model_->measurement_jacobian(X) * d;
  } else {
    const double dnorm = d.cwiseAbs().maxCoeff();
    if (dnorm == 0.0) {
      return 0.0;
    }
    const double eps = 1e-6 * std::max(1.0, X.cwiseAbs().maxCoeff()) / dnorm;
    jd = (model_->measure(X + eps * d) - model_->measure(X - eps * d)) / (2.0 * eps);
  }
  return -jd.dot(model_->R_factor().solve(ry)) + d.dot(model_->apply_Q_inverse(X - prior_mean_));
}

namespace {

// Q^{-1} + B^T B with B the whitened measurement Jacobian.
Matrix gn_hessian_from(const Matrix& q_inv, const Matrix& B) {
  Matrix H = q_inv;
  H.selfadjointView<Eigen::Lower>().rankUpdate(B.transpose());
  H.triangularView<Eigen::StrictlyUpper>() = H.transpose();
  return H;
}

}  // namespace

Matrix LogTarget::gauss_newton_hessian(const Vector& X) const {
  return gn_hessian_from(model_->Q_inverse_lower(), model_->whiten_measurement(model_->measurement_jacobian(X)));
}

TargetMinimum minimize_log_target(const LogTarget& target, const Vector& x_init, const MinimizeOptions& options) {
  const StateSpaceModel& model = target.model();
  const Matrix q_inv = model.Q_inverse_lower();

  TargetMinimum result;
  Vector x = x_init;
  double fx = target.eval(x);
  Matrix B;
  bool b_at_x = false;
  for (int it = 0; it < options.max_iterations; ++it) {
    const Vector ry = target.observation() - model.measure(x);
    B = model.whiten_measurement(model.measurement_jacobian(x));
    b_at_x = true;
    const Vector zy = model.whiten_measurement(ry);
    const Vector g = -B.transpose() * zy + model.apply_Q_inverse(x - target.prior_mean());
    result.iterations = it;
    if (g.cwiseAbs().maxCoeff() < options.gradient_tolerance) {
      result.converged = true;
      break;
    }

    // Lower triangles only; Cholesky reads nothing else.
    Matrix H = q_inv;
    H.selfadjointView<Eigen::Lower>().rankUpdate(B.transpose());
    Vector step;
    if (model.has_measurement_curvature()) {
      // Newton correction -sum_l (R^{-1} r)_l Hess(h_l); plain GN when it is not SPD.
      const Matrix curvature = model.measurement_curvature(x, model.whiten_measurement_transpose(zy));
      H.triangularView<Eigen::Lower>() -= curvature;
      Cholesky llt;
      if (llt.compute(H)) {
        step = -llt.solve(g);
      } else {
        H.triangularView<Eigen::Lower>() += curvature;
      }
    }
    if (step.size() == 0) {
      H.triangularView<Eigen::StrictlyUpper>() = H.transpose();
      step = -spd_factor(H).solve(g);
    }
    const double slope = g.dot(step);
    // Below this the decrease is lost in the rounding of F.
    const double resolution = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(fx));
    double t = 1.0;
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      const Vector trial = x + t * step;
      const double ft = target.eval(trial);
      if (std::isfinite(ft) && (ft <= fx + options.armijo_c * t * slope || (t == 1.0 && -slope <= resolution && ft <= fx + resolution))) {
        x = trial;
        fx = ft;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      break;
    }
    b_at_x = false;
    result.iterations = it + 1;
  }
  result.hessian = b_at_x ? gn_hessian_from(q_inv, B) : target.gauss_newton_hessian(x);
  result.mu = std::move(x);
  result.phi = fx;
  return result;
}

namespace {

struct RootResult {
  double lambda = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Root of g(lambda) = F(mu + lambda d) - phi - rho with g(0) = -rho < 0.
// Newton steps in u = lambda^2, where g is nearly linear, kept inside the
// current bracket; the upper end grows by doubling until g changes sign.
RootResult solve_radial(const LogTarget& target, const Vector& mu, double phi, const Vector& d, double rho,
                        double lambda_start, const RandomMapOptions& options) {
  auto g = [&](double lambda) { return target.eval(mu + lambda * d) - phi - rho; };

  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  double lambda = std::min(lambda_start, options.lambda_max);
  RootResult out;
  for (int it = 0; it < options.max_iterations; ++it) {
    const double r = g(lambda);
    out.iterations = it + 1;
    if (std::abs(r) < options.residual_tolerance) {
      out.lambda = lambda;
      out.residual = r;
      out.converged = true;
      return out;
    }
    double next = 0.0;
    if (!std::isfinite(r)) {
      hi = lambda;
      next = 0.5 * (lo + hi);
    } else {
      if (r < 0.0) {
        lo = lambda;
      } else {
        hi = lambda;
      }
      const double slope = target.directional_derivative(mu + lambda * d, d);
      const double next_u = lambda * lambda - 2.0 * lambda * r / slope;
      next = next_u > 0.0 ? std::sqrt(next_u) : 0.0;
      const bool usable = slope > 0.0 && next > lo && next < hi;
      if (std::isinf(hi)) {
        if (!usable) {
          next = 2.0 * lambda;
        }
        if (lambda >= options.lambda_max) {
          throw MapSolveError("no sign change of the implicit equation below lambda_max");
        }
        next = std::min(next, options.lambda_max);
      } else if (!usable) {
        next = 0.5 * (lo + hi);
      }
    }
    if (next == lambda || (std::isfinite(hi) && hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi)) {
      out.lambda = lambda;
      out.residual = r;
      return out;
    }
    lambda = next;
  }
  out.lambda = lambda;
  out.residual = g(lambda);
  out.converged = std::abs(out.residual) < options.residual_tolerance;
  return out;
}

Matrix lower_triangular_inverse(const Matrix& L) {
  const Eigen::Index n = L.rows();
  Matrix X = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    auto x = X.col(j);
    x[j] = 1.0;
    for (Eigen::Index k = j; k < n; ++k) {
      x[k] /= L(k, k);
      x.tail(n - k - 1) -= x[k] * L.col(k).tail(n - k - 1);
    }
  }
  return X;
}

// Lower Cholesky factor of H^{-1}. With P the reversal permutation and
// P H P = C C^T, the factor is P C^{-T} P.
Matrix inverse_cholesky(const Matrix& H) {
  const Matrix flipped = H.reverse();
  const Matrix c_inv = lower_triangular_inverse(spd_factor(flipped).matrixL());
  return c_inv.transpose().reverse();
}

}  // namespace

ImplicitSolution random_map_solve(const LogTarget& target, const TargetMinimum& minimum, const Vector& xi,
                                  double alpha, const RandomMapOptions& options) {
  if (!(alpha > 0.0)) {
    throw MapSolveError("random map needs alpha > 0");
  }
  const Eigen::Index n = xi.size();
  if (n != target.dim()) {
    throw MapSolveError("reference draw has the wrong dimension");
  }
  const Matrix lower = inverse_cholesky(minimum.hessian);
  Matrix h_inv = Matrix::Zero(n, n);
  h_inv.selfadjointView<Eigen::Lower>().rankUpdate(lower);
  h_inv.triangularView<Eigen::StrictlyUpper>() = h_inv.transpose();
  const double log_det_l = log_det_lower(lower);

  ImplicitSolution sol;
  sol.phi = minimum.phi;
  sol.mode_covariance = h_inv;
  const double xi_sq = xi.squaredNorm();
  if (std::sqrt(xi_sq) < kDegenerateXiNorm) {
    // Quadratic model: lambda = 1 / sqrt(alpha), J = L / sqrt(alpha).
    sol.x = minimum.mu;
    sol.lambda = 1.0 / std::sqrt(alpha);
    sol.log_jacobian = log_det_l - 0.5 * static_cast<double>(n) * std::log(alpha);
    sol.residual = target.eval(sol.x) - minimum.phi;
    sol.converged = true;
    return sol;
  }

  const double rho = xi_sq / (2.0 * alpha);
  const Vector d = lower * xi;
  const RootResult root = solve_radial(target, minimum.mu, minimum.phi, d, rho, 1.0, options);
  sol.x = minimum.mu + root.lambda * d;
  sol.lambda = root.lambda;
  sol.residual = root.residual;
  sol.iterations = root.iterations;
  sol.converged = root.converged;

  if (options.log_jacobian == LogJacobianMethod::kClosedForm) {
    // X = mu + lambda(xi) L xi. By the determinant lemma and implicit
    // differentiation, det J = lambda^n det L * (|xi|^2 / alpha) / (lambda d.grad F).
    const double slope = target.directional_derivative(sol.x, d);
    sol.log_jacobian = static_cast<double>(n) * std::log(sol.lambda) + log_det_l + std::log(xi_sq / alpha) -
                       std::log(std::abs(sol.lambda * slope));
  } else {
    Matrix J(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double delta = 1e-6 * std::max(1.0, std::abs(xi[j]));
      Vector xp = xi;
      Vector xm = xi;
      xp[j] += delta;
      xm[j] -= delta;
      const RootResult rp =
          solve_radial(target, minimum.mu, minimum.phi, lower * xp, xp.squaredNorm() / (2.0 * alpha), root.lambda, options);
      const RootResult rm =
          solve_radial(target, minimum.mu, minimum.phi, lower * xm, xm.squaredNorm() / (2.0 * alpha), root.lambda, options);
      J.col(j) = (rp.lambda * (lower * xp) - rm.lambda * (lower * xm)) / (xp[j] - xm[j]);
    }
    const Eigen::PartialPivLU<Matrix> lu(J);
    sol.log_jacobian = lu.matrixLU().diagonal().array().abs().log().sum();
  }
  return sol;
}

}  // namespace ipf
