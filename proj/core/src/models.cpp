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

#include "ipf/models.hpp"

#include <cmath>
#include <string>

#include "ipf/kf_bank.hpp"

namespace ipf {

namespace {

bool is_symmetric(const Matrix& M) {
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

Eigen::LLT<Matrix> factor_noise_covariance(const Matrix& M, int dim, const char* name) {
  if (M.rows() != dim || M.cols() != dim) {
    throw InvalidModelError(std::string(name) + " has shape " + std::to_string(M.rows()) + "x" +
                            std::to_string(M.cols()) + ", expected " + std::to_string(dim) + "x" +
                            std::to_string(dim));
  }
  if (!is_symmetric(M)) {
    throw InvalidModelError(std::string(name) + " is not symmetric");
  }
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success) {
    throw InvalidModelError(std::string(name) + " is not positive definite");
  }
  return llt;
}

double log_det(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// J_drift(x) * M, where J_drift has four nonzeros per row.
Matrix apply_drift_jacobian(const Vector& x, const Matrix& M) {
  const Eigen::Index n = x.size();
  Vector a(n);
  Vector b(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    a[j] = x[(j + n - 1) % n];
    b[j] = x[(j + 1) % n] - x[(j + n - 2) % n];
  }
  const auto edge = [&](const double* m, double* o, Eigen::Index j) {
    o[j] = a[j] * (m[(j + 1) % n] - m[(j + n - 2) % n]) + b[j] * m[(j + n - 1) % n] - m[j];
  };
  Matrix out(n, M.cols());
  for (Eigen::Index c = 0; c < M.cols(); ++c) {
    const double* m = M.col(c).data();
    double* o = out.col(c).data();
    edge(m, o, 0);
    edge(m, o, 1);
    for (Eigen::Index j = 2; j < n - 1; ++j) {
      o[j] = a[j] * (m[j + 1] - m[j - 2]) + b[j] * m[j - 1] - m[j];
    }
    edge(m, o, n - 1);
  }
  return out;
}

void require_lorenz_dim(Eigen::Index n) {
  if (n < 4) {
    throw InvalidModelError("Lorenz'96 needs at least 4 components, got " + std::to_string(n));
  }
}

}  // namespace

StateSpaceModel::StateSpaceModel(int n_x, int n_y, VectorMap f, VectorMap h, Matrix Q, Matrix R,
                                 NoiseSampler process_noise, NoiseSampler measurement_noise)
    : n_x_(n_x),
      n_y_(n_y),
      f_(std::move(f)),
      h_(std::move(h)),
      Q_(std::move(Q)),
      R_(std::move(R)),
      w_(std::move(process_noise)),
      v_(std::move(measurement_noise)) {
  if (n_x_ < 1 || n_y_ < 1) {
    throw InvalidModelError("state and measurement dimensions must be positive");
  }
  if (!f_ || !h_ || !w_ || !v_) {
    throw InvalidModelError("model maps and noise samplers must be callable");
  }
  Q_llt_ = factor_noise_covariance(Q_, n_x_, "Q");
  R_llt_ = factor_noise_covariance(R_, n_y_, "R");
  log_det_Q_ = log_det(Q_llt_);
  log_det_R_ = log_det(R_llt_);
  Q_inv_ = Q_llt_.solve(Matrix::Identity(n_x_, n_x_));
  Q_inv_ = 0.5 * (Q_inv_ + Q_inv_.transpose()).eval();
  R_whiten_ = R_llt_.matrixL().solve(Matrix::Identity(n_y_, n_y_));
  R_whiten_.triangularView<Eigen::StrictlyUpper>().setZero();

  q_diagonal_ = Q_.isDiagonal(0.0);
  r_diagonal_ = R_.isDiagonal(0.0);
  if (q_diagonal_) {
    q_inv_diag_ = Q_.diagonal().cwiseInverse();
    q_whiten_diag_ = q_inv_diag_.cwiseSqrt();
  }
  if (r_diagonal_) {
    r_whiten_diag_ = R_.diagonal().cwiseInverse().cwiseSqrt();
  }
}

Vector StateSpaceModel::whiten_measurement(const Vector& r) const {
  if (r_diagonal_) {
    return r.cwiseProduct(r_whiten_diag_);
  }
  return R_whiten_.triangularView<Eigen::Lower>() * r;
}

Matrix StateSpaceModel::whiten_measurement(const Matrix& J) const {
  if (r_diagonal_) {
    return r_whiten_diag_.asDiagonal() * J;
  }
  return R_whiten_.triangularView<Eigen::Lower>() * J;
}

Vector StateSpaceModel::whiten_measurement_transpose(const Vector& z) const {
  if (r_diagonal_) {
    return z.cwiseProduct(r_whiten_diag_);
  }
  return R_whiten_.triangularView<Eigen::Lower>().transpose() * z;
}

Vector StateSpaceModel::whiten_process(const Vector& r) const {
  if (q_diagonal_) {
    return r.cwiseProduct(q_whiten_diag_);
  }
  return Q_llt_.matrixL().solve(r);
}

Vector StateSpaceModel::apply_Q_inverse(const Vector& v) const {
  if (q_diagonal_) {
    return v.cwiseProduct(q_inv_diag_);
  }
  return Q_inv_ * v;
}

Matrix StateSpaceModel::Q_inverse_lower() const {
  if (q_diagonal_) {
    return q_inv_diag_.asDiagonal();
  }
  return Q_inv_;
}

Matrix StateSpaceModel::transition_jacobian(const Vector& x) const {
  return f_jacobian_ ? f_jacobian_(x) : jacobian(f_, x);
}

Matrix StateSpaceModel::measurement_jacobian(const Vector& x) const {
  return h_jacobian_ ? h_jacobian_(x) : jacobian(h_, x);
}

NoiseSampler gaussian_noise_sampler(const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw InvalidModelError("noise covariance is not positive definite");
  }
  Matrix lower = llt.matrixL();
  return [lower](RandomStream& rng) -> Vector { return lower * rng.normal_vector(lower.rows()); };
}

NoiseSampler uniform_noise_sampler(int dim, double halfwidth) {
  if (dim < 1 || halfwidth < 0.0) {
    throw InvalidModelError("uniform noise needs dim >= 1 and halfwidth >= 0");
  }
  return [dim, halfwidth](RandomStream& rng) -> Vector {
    Vector v(dim);
    for (int i = 0; i < dim; ++i) {
      v[i] = halfwidth > 0.0 ? rng.uniform(-halfwidth, halfwidth) : 0.0;
    }
    return v;
  };
}

NoiseSampler zero_noise_sampler(int dim) {
  return [dim](RandomStream&) -> Vector { return Vector::Zero(dim); };
}

void Lorenz96Config::validate() const {
  require_lorenz_dim(n_x);
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw InvalidModelError("Lorenz'96 dt must be positive");
  }
  if (!(noise_halfwidth >= 0.0) || !std::isfinite(noise_halfwidth)) {
    throw InvalidModelError("noise halfwidth must be non-negative");
  }
  if (!std::isfinite(forcing)) {
    throw InvalidModelError("forcing must be finite");
  }
}

Vector lorenz96_drift(const Vector& x, double forcing) {
  const Eigen::Index n = x.size();
  require_lorenz_dim(n);
  Vector dx(n);
  dx[0] = (x[1] - x[n - 2]) * x[n - 1] - x[0] + forcing;
  dx[1] = (x[2] - x[n - 1]) * x[0] - x[1] + forcing;
  for (Eigen::Index j = 2; j < n - 1; ++j) {
    dx[j] = (x[j + 1] - x[j - 2]) * x[j - 1] - x[j] + forcing;
  }
  dx[n - 1] = (x[0] - x[n - 3]) * x[n - 2] - x[n - 1] + forcing;
  return dx;
}

Matrix lorenz96_drift_jacobian(const Vector& x) {
  const Eigen::Index n = x.size();
  require_lorenz_dim(n);
  return apply_drift_jacobian(x, Matrix::Identity(n, n));
}

Vector rk4_step(const Vector& x, const Lorenz96Config& cfg) {
  require_lorenz_dim(x.size());
  const double dt = cfg.dt;
  const Vector h1 = lorenz96_drift(x, cfg.forcing);
  const Vector h2 = lorenz96_drift(x + 0.5 * dt * h1, cfg.forcing);
  const Vector h3 = lorenz96_drift(x + 0.5 * dt * h2, cfg.forcing);
  const Vector h4 = lorenz96_drift(x + dt * h3, cfg.forcing);
  return x + (dt / 6.0) * (h1 + 2.0 * h2 + 2.0 * h3 + h4);
}

Matrix rk4_step_jacobian(const Vector& x, const Lorenz96Config& cfg) {
  const Eigen::Index n = x.size();
  require_lorenz_dim(n);
  const double dt = cfg.dt;
  const Matrix I = Matrix::Identity(n, n);

  const Vector x1 = x;
  const Vector h1 = lorenz96_drift(x1, cfg.forcing);
  const Vector x2 = x + 0.5 * dt * h1;
  const Vector h2 = lorenz96_drift(x2, cfg.forcing);
  const Vector x3 = x + 0.5 * dt * h2;
  const Vector h3 = lorenz96_drift(x3, cfg.forcing);
  const Vector x4 = x + dt * h3;

  // dh_s/dx = J_drift(x_s) * dx_s/dx, dx_s/dx = I + c dh_{s-1}/dx.
  const Matrix J1 = apply_drift_jacobian(x1, I);
  const Matrix J2 = apply_drift_jacobian(x2, I + 0.5 * dt * J1);
  const Matrix J3 = apply_drift_jacobian(x3, I + 0.5 * dt * J2);
  const Matrix J4 = apply_drift_jacobian(x4, I + dt * J3);
  return I + (dt / 6.0) * (J1 + 2.0 * J2 + 2.0 * J3 + J4);
}

Vector lorenz96_measure(const Vector& x) {
  if (x.size() % 2 != 0 || x.size() == 0) {
    throw InvalidModelError("measurement needs an even state dimension, got " + std::to_string(x.size()));
  }
  const Eigen::Index n_y = x.size() / 2;
  Vector y(n_y);
  for (Eigen::Index l = 0; l < n_y; ++l) {
    const double v = x[2 * l];
    y[l] = v + std::sin(v);
  }
  return y;
}

Matrix lorenz96_measure_jacobian(const Vector& x) {
  if (x.size() % 2 != 0 || x.size() == 0) {
    throw InvalidModelError("measurement needs an even state dimension, got " + std::to_string(x.size()));
  }
  const Eigen::Index n_y = x.size() / 2;
  Matrix H = Matrix::Zero(n_y, x.size());
  for (Eigen::Index l = 0; l < n_y; ++l) {
    H(l, 2 * l) = 1.0 + std::cos(x[2 * l]);
  }
  return H;
}

Matrix lorenz96_measure_curvature(const Vector& x, const Vector& weights) {
  if (x.size() % 2 != 0 || weights.size() != x.size() / 2) {
    throw InvalidModelError("curvature weights must have n_x / 2 entries");
  }
  Matrix C = Matrix::Zero(x.size(), x.size());
  for (Eigen::Index l = 0; l < weights.size(); ++l) {
    C(2 * l, 2 * l) = -weights[l] * std::sin(x[2 * l]);
  }
  return C;
}

StateSpaceModel make_lorenz96_model(const Lorenz96Config& cfg, const Lorenz96ModelOptions& options) {
  cfg.validate();
  if (cfg.n_x % 2 != 0) {
    throw InvalidModelError("measurement needs an even state dimension, got " + std::to_string(cfg.n_x));
  }
  const int n_x = cfg.n_x;
  const int n_y = cfg.n_y();
  const double var = cfg.noise_variance();
  if (!(var > 0.0)) {
    throw InvalidModelError("noise halfwidth must be positive to declare Q and R");
  }

  NoiseSampler w = options.truth_noise ? uniform_noise_sampler(n_x, cfg.noise_halfwidth) : zero_noise_sampler(n_x);
  NoiseSampler v = options.truth_noise ? uniform_noise_sampler(n_y, cfg.noise_halfwidth) : zero_noise_sampler(n_y);

  StateSpaceModel model(
      n_x, n_y, [cfg](const Vector& x) { return rk4_step(x, cfg); }, [](const Vector& x) { return lorenz96_measure(x); },
      var * Matrix::Identity(n_x, n_x), var * Matrix::Identity(n_y, n_y), std::move(w), std::move(v));

  if (options.jacobian == JacobianSource::kAnalytic) {
    model.set_transition_jacobian([cfg](const Vector& x) { return rk4_step_jacobian(x, cfg); });
    model.set_measurement_jacobian([](const Vector& x) { return lorenz96_measure_jacobian(x); });
    model.set_measurement_curvature(
        [](const Vector& x, const Vector& w) { return lorenz96_measure_curvature(x, w); });
  }
  return model;
}

Trajectory simulate_truth(const StateSpaceModel& model, const Vector& x0, int steps, std::uint64_t seed) {
  if (x0.size() != model.n_x()) {
    throw InvalidModelError("initial state has the wrong dimension");
  }
  RandomStream process_rng(derive_seed(seed, StreamPurpose::kProcessNoise));
  RandomStream measurement_rng(derive_seed(seed, StreamPurpose::kMeasurementNoise));

  Trajectory traj;
  traj.seed = seed;
  traj.states.reserve(static_cast<std::size_t>(std::max(steps, 0)) + 1);
  traj.measurements.reserve(static_cast<std::size_t>(std::max(steps, 0)));
  traj.states.push_back(x0);
  for (int k = 1; k <= steps; ++k) {
    traj.states.push_back(model.transition(traj.states.back()) + model.sample_process_noise(process_rng));
  }
  for (int k = 1; k <= steps; ++k) {
    traj.measurements.push_back(model.measure(traj.states[static_cast<std::size_t>(k)]) +
                                model.sample_measurement_noise(measurement_rng));
  }
  return traj;
}

Vector lorenz96_initial_state(const Lorenz96Config& cfg, std::uint64_t seed, int spinup_steps) {
  cfg.validate();
  RandomStream rng(derive_seed(seed, StreamPurpose::kInitialState));
  Vector x = Vector::Constant(cfg.n_x, cfg.forcing) + rng.normal_vector(cfg.n_x);
  for (int s = 0; s < spinup_steps; ++s) {
    x = rk4_step(x, cfg);
  }
  return x;
}

}  // namespace ipf
