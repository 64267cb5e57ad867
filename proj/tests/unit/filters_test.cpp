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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "ipf/filters.hpp"
#include "ipf/models.hpp"
#include "support/linear_gaussian.hpp"

namespace {

using ipf::Matrix;
using ipf::Vector;

constexpr ipf::FilterKind kAllKinds[] = {ipf::FilterKind::kEpf, ipf::FilterKind::kUpf, ipf::FilterKind::kEipf,
                                         ipf::FilterKind::kUipf, ipf::FilterKind::kIipf};

double max_abs(const Matrix& M) { return M.cwiseAbs().maxCoeff(); }

double weight_sum(const ipf::Ensemble& ens) {
  const std::vector<double> w = ens.weights();
  return std::accumulate(w.begin(), w.end(), 0.0);
}

double raw_weight_sum(const ipf::Ensemble& ens) {
  double s = 0.0;
  for (const ipf::Particle& p : ens.particles) {
    s += std::exp(p.log_weight);
  }
  return s;
}

ipf::Ensemble ensemble_of(const std::vector<Vector>& states, const std::vector<double>& weights, const Matrix& cov) {
  ipf::Ensemble ens;
  for (std::size_t i = 0; i < states.size(); ++i) {
    ens.particles.push_back(ipf::Particle{states[i], std::log(weights[i]), cov});
  }
  return ens;
}

ipf::StateSpaceModel scalar_identity_model(double q, double r) {
  auto id = [](const Vector& x) -> Vector { return x; };
  ipf::StateSpaceModel model(1, 1, id, id, Matrix::Constant(1, 1, q), Matrix::Constant(1, 1, r),
                             ipf::zero_noise_sampler(1), ipf::zero_noise_sampler(1));
  model.set_transition_jacobian([](const Vector&) -> Matrix { return Matrix::Identity(1, 1); });
  model.set_measurement_jacobian([](const Vector&) -> Matrix { return Matrix::Identity(1, 1); });
  return model;
}

TEST(Ess, Examples) {
  EXPECT_DOUBLE_EQ(ipf::ess(std::vector<double>(100, 0.01)), 100.0);
  EXPECT_EQ(ipf::ess(std::vector<double>{0.0, 1.0, 0.0}), 1.0);
  EXPECT_EQ(ipf::ess(std::vector<double>{0.5, 0.5, 0.0, 0.0}), 2.0);
}

TEST(SystematicResample, UniformWeightsKeepEveryParticleOnce) {
  const std::vector<double> w(8, 0.125);
  for (int k = 0; k < 1000; ++k) {
    const double offset = k / 1000.0;
    const std::vector<int> counts = ipf::systematic_resample_indices(w, offset);
    for (int c : counts) {
      EXPECT_EQ(c, 1) << offset;
    }
  }
}

TEST(SystematicResample, HalfHalfGivesTwoCopiesEach) {
  const std::vector<double> w = {0.5, 0.5, 0.0, 0.0};
  for (double offset : {0.0, 0.1, 0.5, 0.9, 0.999}) {
    EXPECT_EQ(ipf::systematic_resample_indices(w, offset), (std::vector<int>{2, 2, 0, 0})) << offset;
  }
}

TEST(SystematicResample, PointMassGivesAllCopies) {
  const std::vector<double> w = {0.0, 0.0, 1.0, 0.0, 0.0};
  for (double offset : {0.0, 0.3, 0.99}) {
    EXPECT_EQ(ipf::systematic_resample_indices(w, offset), (std::vector<int>{0, 0, 5, 0, 0}));
  }
}

TEST(SystematicResample, CountBoundsOverManyTrials) {
  std::mt19937_64 gen(1);
  std::gamma_distribution<double> gamma(0.5, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int n = 20;
  std::vector<double> mean_counts(n, 0.0);
  std::vector<double> w(n);
  for (double& v : w) {
    v = gamma(gen);
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) {
    v /= total;
  }
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    const std::vector<int> counts = ipf::systematic_resample_indices(w, uni(gen));
    EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), 0), n);
    for (int i = 0; i < n; ++i) {
      const double expected = n * w[i];
      ASSERT_GE(counts[i], static_cast<int>(std::floor(expected - 1e-9)));
      ASSERT_LE(counts[i], static_cast<int>(std::ceil(expected + 1e-9)));
      mean_counts[i] += counts[i];
    }
  }
  for (int i = 0; i < n; ++i) {
    EXPECT_NEAR(mean_counts[i] / trials, n * w[i], 0.03);
  }
}

TEST(SystematicResample, CarriesCovariancesAndResetsWeights) {
  ipf::Ensemble ens;
  ens.step = 7;
  for (int i = 0; i < 4; ++i) {
    ens.particles.push_back(ipf::Particle{Vector::Constant(2, i), i < 2 ? std::log(0.5) : -INFINITY,
                                          (i + 1.0) * Matrix::Identity(2, 2)});
  }
  ipf::RandomStream rng(2);
  const ipf::Ensemble out = ipf::systematic_resample(ens, rng);
  ASSERT_EQ(out.size(), 4U);
  EXPECT_EQ(out.step, 7);
  for (const ipf::Particle& p : out.particles) {
    EXPECT_DOUBLE_EQ(p.log_weight, -std::log(4.0));
    EXPECT_TRUE(p.state[0] == 0.0 || p.state[0] == 1.0);
    EXPECT_EQ(p.cov, (p.state[0] + 1.0) * Matrix::Identity(2, 2));
  }
}

TEST(Estimate, Examples) {
  const Matrix cov = Matrix::Identity(1, 1);
  EXPECT_EQ(ipf::estimate(ensemble_of({Vector::Constant(1, 2.5)}, {1.0}, cov)), Vector::Constant(1, 2.5));
  EXPECT_EQ(ipf::estimate(ensemble_of({Vector::Constant(1, 3.0), Vector::Constant(1, -3.0)}, {0.5, 0.5}, cov))[0],
            0.0);
  EXPECT_NEAR(ipf::estimate(ensemble_of({Vector::Constant(1, 0.0), Vector::Constant(1, 4.0)}, {0.25, 0.75}, cov))[0],
              3.0, 1e-15);
}

TEST(Estimate, MatchesBruteForceWeightedSum) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 17;
    std::vector<Vector> states;
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) {
      states.push_back(ipf::testing::random_matrix(5, 1, gen, 10.0));
      w[i] = uni(gen);
    }
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) {
      v /= total;
    }
    const ipf::Ensemble ens = ensemble_of(states, w, Matrix::Identity(5, 5));
    Vector brute = Vector::Zero(5);
    for (int j = 0; j < 5; ++j) {
      for (int i = 0; i < n; ++i) {
        brute[j] += w[i] * states[i][j];
      }
    }
    EXPECT_LT(max_abs(ipf::estimate(ens) - brute), 1e-12);
  }
}

TEST(InitEnsemble, ZeroSpreadAndUniformWeights) {
  const Vector x0 = Vector::LinSpaced(3, 1.0, 3.0);
  const ipf::Ensemble ens = ipf::init_ensemble(5, x0, Matrix::Zero(3, 3), 1);
  ASSERT_EQ(ens.size(), 5U);
  for (const ipf::Particle& p : ens.particles) {
    EXPECT_EQ(p.state, x0);
    EXPECT_DOUBLE_EQ(p.log_weight, -std::log(5.0));
  }
  for (double w : ens.weights()) {
    EXPECT_DOUBLE_EQ(w, 0.2);
  }
  EXPECT_THROW((void)ipf::init_ensemble(0, x0, Matrix::Zero(3, 3), 1), ipf::InvalidModelError);
}

TEST(InitEnsemble, EmpiricalMeanWithinCltBound) {
  const Vector x0 = Vector::LinSpaced(4, -1.0, 2.0);
  Matrix P0 = Matrix::Zero(4, 4);
  P0.diagonal() << 1.0, 4.0, 0.25, 9.0;
  const ipf::Ensemble ens = ipf::init_ensemble(10000, x0, P0, 2);
  Vector mean = Vector::Zero(4);
  for (const ipf::Particle& p : ens.particles) {
    mean += p.state;
    EXPECT_EQ(p.cov, P0);
  }
  mean /= 10000.0;
  for (int j = 0; j < 4; ++j) {
    EXPECT_LT(std::abs(mean[j] - x0[j]), 3.0 * std::sqrt(P0(j, j)) / 100.0);
  }
}

TEST(FilterKind, NamesRoundTrip) {
  for (ipf::FilterKind k : kAllKinds) {
    EXPECT_EQ(ipf::parse_filter_kind(ipf::to_string(k)), k);
  }
  EXPECT_FALSE(ipf::parse_filter_kind("BPF").has_value());
}

TEST(FilterOptions, Validation) {
  ipf::FilterOptions o;
  EXPECT_NO_THROW(o.validate());
  o.alpha = 1.5;
  EXPECT_THROW(o.validate(), ipf::InvalidModelError);
  o = {};
  o.resample_threshold_frac = -0.1;
  EXPECT_THROW(o.validate(), ipf::InvalidModelError);
  o = {};
  o.cov_inflation = 0.0;
  EXPECT_THROW(o.validate(), ipf::InvalidModelError);
}

TEST(KfIpfStep, CollapsesOntoKalmanMean) {
  const ipf::testing::LinearGaussianSystem sys = ipf::testing::random_linear_system(4, 2, 4);
  const ipf::StateSpaceModel model = ipf::testing::make_linear_model(sys);
  const Vector x0 = Vector::Constant(4, 1.0);
  const ipf::Trajectory truth = ipf::simulate_truth(model, x0, 30, 5);
  ipf::FilterOptions options;
  options.alpha = 0.0;
  for (ipf::KfBackend backend : {ipf::KfBackend::kEkf, ipf::KfBackend::kUkf}) {
    ipf::Ensemble ens = ipf::init_ensemble(5, x0, Matrix::Zero(4, 4), 6);
    for (ipf::Particle& p : ens.particles) {
      p.cov = Matrix::Identity(4, 4);
    }
    Vector m = x0;
    Matrix P = Matrix::Identity(4, 4);
    for (int k = 0; k < truth.steps(); ++k) {
      const Vector& y = truth.measurements[k];
      ens = ipf::kf_ipf_step(ens, y, model, backend, options, 7);
      const ipf::testing::KalmanStep ref = ipf::testing::kalman_step(sys, m, P, y);
      m = ref.mean;
      P = ref.cov;
      for (const ipf::Particle& p : ens.particles) {
        EXPECT_LT(max_abs(p.state - m), 1e-8);
      }
      EXPECT_LT(max_abs(ipf::estimate(ens) - m), 1e-8);
    }
  }
}

TEST(KfIpfStep, ZeroAlphaIsDeterministic) {
  ipf::Lorenz96Config cfg;
  const ipf::StateSpaceModel model = ipf::make_lorenz96_model(cfg, {.jacobian = ipf::JacobianSource::kAnalytic});
  const ipf::Trajectory truth = ipf::simulate_truth(model, ipf::lorenz96_initial_state(cfg, 1), 3, 2);
  const ipf::Ensemble ens = ipf::init_ensemble(6, truth.states[0], Matrix::Identity(40, 40), 3);
  ipf::FilterOptions options;
  options.alpha = 0.0;
  options.resample_threshold_frac = 0.0;
  const ipf::Ensemble a = ipf::kf_ipf_step(ens, truth.measurements[0], model, ipf::KfBackend::kEkf, options, 10);
  const ipf::Ensemble b = ipf::kf_ipf_step(ens, truth.measurements[0], model, ipf::KfBackend::kEkf, options, 11);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.particles[i].state, b.particles[i].state);
  }
}

TEST(KfIpfStep, IdenticalParticlesKeepUniformWeights) {
  ipf::Lorenz96Config cfg;
  const ipf::StateSpaceModel model = ipf::make_lorenz96_model(cfg, {.jacobian = ipf::JacobianSource::kAnalytic});
  const ipf::Trajectory truth = ipf::simulate_truth(model, ipf::lorenz96_initial_state(cfg, 1), 1, 2);
  ipf::Ensemble ens = ipf::init_ensemble(4, truth.states[0], Matrix::Zero(40, 40), 3);
  for (ipf::Particle& p : ens.particles) {
    p.cov = Matrix::Identity(40, 40);
  }
  ipf::FilterOptions options;
  options.resample_threshold_frac = 0.0;
  for (ipf::FilterKind kind : {ipf::FilterKind::kEipf, ipf::FilterKind::kUipf}) {
    const ipf::Filter filter(kind, model, options);
    const ipf::Ensemble out = filter.step(ens, truth.measurements[0], 4);
    for (double w : out.weights()) {
      EXPECT_NEAR(w, 0.25, 1e-12) << ipf::to_string(kind);
    }
  }
}

TEST(KfIpfStep, WeightsDoNotDependOnReferenceDraws) {
  ipf::Lorenz96Config cfg;
  const ipf::StateSpaceModel model = ipf::make_lorenz96_model(cfg, {.jacobian = ipf::JacobianSource::kAnalytic});
  const ipf::Trajectory truth = ipf::simulate_truth(model, ipf::lorenz96_initial_state(cfg, 1), 1, 2);
  const ipf::Ensemble ens = ipf::init_ensemble(8, truth.states[0], Matrix::Identity(40, 40), 3);
  ipf::FilterOptions options;
  options.resample_threshold_frac = 0.0;
  for (ipf::KfBackend backend : {ipf::KfBackend::kEkf, ipf::KfBackend::kUkf}) {
    const ipf::Ensemble a = ipf::kf_ipf_step(ens, truth.measurements[0], model, backend, options, 100);
    const ipf::Ensemble b = ipf::kf_ipf_step(ens, truth.measurements[0], model, backend, options, 200);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a.particles[i].log_weight, b.particles[i].log_weight);
      EXPECT_EQ(a.particles[i].cov, b.particles[i].cov);
      EXPECT_NE(a.particles[i].state, b.particles[i].state);
    }
  }
}

TEST(KfPfStep, LinearIncrementalWeightIsPredictiveLikelihood) {
  const ipf::testing::LinearGaussianSystem sys = ipf::testing::random_linear_system(3, 2, 8);
  const ipf::StateSpaceModel model = ipf::testing::make_linear_model(sys);
  std::mt19937_64 gen(9);
  std::vector<Vector> states;
  for (int i = 0; i < 6; ++i) {
    states.push_back(ipf::testing::random_matrix(3, 1, gen));
  }
  const ipf::Ensemble ens = ensemble_of(states, std::vector<double>(6, 1.0 / 6.0), Matrix::Zero(3, 3));
  const Vector y = ipf::testing::random_matrix(2, 1, gen);
  ipf::FilterOptions options;
  options.resample_threshold_frac = 0.0;
  for (ipf::KfBackend backend : {ipf::KfBackend::kEkf, ipf::KfBackend::kUkf}) {
    const ipf::Ensemble out = ipf::kf_pf_step(ens, y, model, backend, options, 10);
    std::vector<double> expected;
    for (const Vector& x : states) {
      expected.push_back(ipf::testing::kalman_step(sys, x, Matrix::Zero(3, 3), y).log_innovation);
    }
    const std::vector<double> w_expected = ipf::normalize_weights(expected);
    const std::vector<double> w = out.weights();
    for (std::size_t i = 0; i < w.size(); ++i) {
      EXPECT_NEAR(w[i], w_expected[i], 1e-8);
    }
  }
}

TEST(KfPfStep, SameStartEqualWeights) {
  const ipf::testing::LinearGaussianSystem sys = ipf::testing::random_linear_system(3, 2, 11);
  const ipf::StateSpaceModel model = ipf::testing::make_linear_model(sys);
  const ipf::Ensemble ens = ensemble_of(std::vector<Vector>(5, Vector::Ones(3)), std::vector<double>(5, 0.2),
                                        Matrix::Zero(3, 3));
  ipf::FilterOptions options;
  options.resample_threshold_frac = 0.0;
  const ipf::Ensemble out = ipf::ekf_pf_step(ens, Vector::Constant(2, 0.5), model, options, 12);
  for (double w : out.weights()) {
    EXPECT_NEAR(w, 0.2, 1e-10);
  }
}

TEST(KfPfStep, TinyNoiseConcentratesOnBestPredictor) {
  const ipf::StateSpaceModel model = scalar_identity_model(1e-2, 1e-8);
  const ipf::Ensemble ens =
      ensemble_of({Vector::Constant(1, 0.0), Vector::Constant(1, 1.0), Vector::Constant(1, 2.0),
                   Vector::Constant(1, 3.0)},
                  std::vector<double>(4, 0.25), Matrix::Zero(1, 1));
  ipf::FilterOptions options;
  options.resample_threshold_frac = 0.0;
  const ipf::Ensemble out = ipf::ekf_pf_step(ens, Vector::Constant(1, 2.1), model, options, 13);
  const std::vector<double> w = out.weights();
  EXPECT_GT(w[2], 0.99);
  EXPECT_NEAR(out.particles[2].state[0], 2.1, 1e-3);
}

TEST(KfPfStep, ProposalDensityAtOwnMean) {
  const ipf::GaussianMoments q{Vector::Constant(1, 0.4), Matrix::Identity(1, 1)};
  EXPECT_NEAR(ipf::gaussian_logpdf(q.mean, q), -0.9189385, 1e-7);
}

TEST(IipfStep, LinearUnitAlphaMatchesPosterior) {
  const ipf::testing::LinearGaussianSystem sys = ipf::testing::random_linear_system(3, 2, 14);
  const ipf::StateSpaceModel model = ipf::testing::make_linear_model(sys);
  const Vector x_prev = Vector::Constant(3, 1.5);
  const Vector y = Vector::Constant(2, -0.5);
  const int n = 10000;
  const ipf::Ensemble ens = ipf::init_ensemble(n, x_prev, Matrix::Zero(3, 3), 15);
  ipf::FilterOptions options;
  options.alpha = 1.0;
  options.resample_threshold_frac = 0.0;
  const ipf::Ensemble out = ipf::iipf_step(ens, y, model, options, 16);
  const ipf::testing::KalmanStep ref = ipf::testing::kalman_step(sys, x_prev, Matrix::Zero(3, 3), y);
  Vector mean = Vector::Zero(3);
  Matrix second = Matrix::Zero(3, 3);
  for (const ipf::Particle& p : out.particles) {
    mean += p.state;
    second += p.state * p.state.transpose();
  }
  mean /= n;
  const Matrix cov = second / n - mean * mean.transpose();
  EXPECT_LT((mean - ref.mean).norm() / ref.mean.norm(), 0.03);
  EXPECT_LT((cov - ref.cov).norm() / ref.cov.norm(), 0.03);
  for (double w : out.weights()) {
    EXPECT_NEAR(w, 1.0 / n, 1e-12);
  }
}

TEST(IipfStep, RejectsZeroAlpha) {
  const ipf::StateSpaceModel model = scalar_identity_model(1.0, 1.0);
  ipf::FilterOptions options;
  options.alpha = 0.0;
  EXPECT_THROW(ipf::Filter(ipf::FilterKind::kIipf, model, options), ipf::InvalidModelError);
}

TEST(Filters, WeightsNormalizedEveryStep) {
  ipf::Lorenz96Config cfg;
  const ipf::StateSpaceModel model = ipf::make_lorenz96_model(cfg, {.jacobian = ipf::JacobianSource::kAnalytic});
  const ipf::Trajectory truth = ipf::simulate_truth(model, ipf::lorenz96_initial_state(cfg, 3), 10, 4);
  for (ipf::FilterKind kind : kAllKinds) {
    for (double frac : {0.0, 0.5, 1.0}) {
      ipf::FilterOptions options;
      options.resample_threshold_frac = frac;
      const ipf::Filter filter(kind, model, options);
      ipf::Ensemble ens =
          ipf::init_ensemble(12, truth.states[0] + Vector::Ones(40), Matrix::Identity(40, 40), 5);
      for (int k = 0; k < truth.steps(); ++k) {
        ens = filter.step(ens, truth.measurements[k], 6);
        EXPECT_EQ(ens.size(), 12U);
        EXPECT_EQ(ens.step, k + 1);
        EXPECT_NEAR(raw_weight_sum(ens), 1.0, 1e-10) << ipf::to_string(kind);
        EXPECT_NEAR(weight_sum(ens), 1.0, 1e-10);
        if (frac == 0.0) {
          EXPECT_FALSE(ens.diagnostics.resampled);
        }
        if (frac == 1.0) {
          EXPECT_TRUE(ens.diagnostics.resampled);
        }
        for (const ipf::Particle& p : ens.particles) {
          EXPECT_TRUE(p.state.allFinite());
        }
      }
    }
  }
}

TEST(Filters, BitIdenticalAcrossThreadCounts) {
  ipf::Lorenz96Config cfg;
  const ipf::StateSpaceModel model = ipf::make_lorenz96_model(cfg, {.jacobian = ipf::JacobianSource::kAnalytic});
  const ipf::Trajectory truth = ipf::simulate_truth(model, ipf::lorenz96_initial_state(cfg, 3), 5, 4);
  for (ipf::FilterKind kind : kAllKinds) {
    std::vector<ipf::Ensemble> results;
    for (int threads : {1, 3, 8}) {
      ipf::FilterOptions options;
      options.threads = threads;
      const ipf::Filter filter(kind, model, options);
      ipf::Ensemble ens = ipf::init_ensemble(10, truth.states[0], Matrix::Identity(40, 40), 5);
      for (int k = 0; k < truth.steps(); ++k) {
        ens = filter.step(ens, truth.measurements[k], 6);
      }
      results.push_back(ens);
    }
    for (std::size_t r = 1; r < results.size(); ++r) {
      for (std::size_t i = 0; i < results[0].size(); ++i) {
        EXPECT_EQ(results[r].particles[i].state, results[0].particles[i].state) << ipf::to_string(kind);
        EXPECT_EQ(results[r].particles[i].log_weight, results[0].particles[i].log_weight);
        EXPECT_EQ(results[r].particles[i].cov, results[0].particles[i].cov);
      }
    }
  }
}

// Time-averaged RMSE to the KF mean over the RMS KF posterior std.
double kalman_tracking_ratio(ipf::FilterKind kind, int particles) {
  const ipf::testing::LinearGaussianSystem sys = ipf::testing::random_linear_system(2, 1, 17);
  const ipf::StateSpaceModel model = ipf::testing::make_linear_model(sys);
  const Vector x0 = Vector::Constant(2, 0.5);
  const ipf::Trajectory truth = ipf::simulate_truth(model, x0, 15, 18);
  Vector m = x0;
  Matrix P = Matrix::Zero(2, 2);
  const ipf::Filter filter(kind, model, ipf::FilterOptions{});
  ipf::Ensemble ens = ipf::init_ensemble(particles, x0, Matrix::Zero(2, 2), 19);
  for (ipf::Particle& p : ens.particles) {
    p.cov = Matrix::Zero(2, 2);
  }
  double sq = 0.0;
  double ref_sq = 0.0;
  for (int k = 0; k < truth.steps(); ++k) {
    const ipf::testing::KalmanStep ref = ipf::testing::kalman_step(sys, m, P, truth.measurements[k]);
    m = ref.mean;
    P = ref.cov;
    ens = filter.step(ens, truth.measurements[k], 20);
    sq += (ipf::estimate(ens) - m).squaredNorm() / 2.0;
    ref_sq += P.trace() / 2.0;
  }
  return std::sqrt(sq / ref_sq);
}

TEST(Filters, LinearGaussianTracksKalmanMean) {
  for (ipf::FilterKind kind : {ipf::FilterKind::kEipf, ipf::FilterKind::kUipf, ipf::FilterKind::kIipf}) {
    EXPECT_LT(kalman_tracking_ratio(kind, 1000), 0.05) << ipf::to_string(kind);
  }
}

TEST(Filters, ProposalFiltersConvergeToKalmanMean) {
  for (ipf::FilterKind kind : {ipf::FilterKind::kEpf, ipf::FilterKind::kUpf}) {
    const double coarse = kalman_tracking_ratio(kind, 250);
    const double fine = kalman_tracking_ratio(kind, 4000);
    EXPECT_LT(fine, coarse / 2.0) << ipf::to_string(kind);
    EXPECT_LT(fine, 0.05) << ipf::to_string(kind);
  }
}

TEST(Snapshot, RoundTrip) {
  std::mt19937_64 gen(21);
  ipf::Ensemble ens;
  ens.step = 12;
  for (int i = 0; i < 4; ++i) {
    ens.particles.push_back(ipf::Particle{ipf::testing::random_matrix(3, 1, gen), std::log(0.25 + 0.1 * i),
                                          ipf::testing::random_spd(3, gen)});
  }
  ens.particles[3].log_weight = -std::numeric_limits<double>::infinity();
  const ipf::Ensemble back = ipf::ensemble_from_json(ipf::ensemble_to_json(ens));
  EXPECT_EQ(back.step, 12);
  ASSERT_EQ(back.size(), ens.size());
  for (std::size_t i = 0; i < ens.size(); ++i) {
    EXPECT_EQ(back.particles[i].state, ens.particles[i].state);
    EXPECT_EQ(back.particles[i].log_weight, ens.particles[i].log_weight);
    EXPECT_LT(max_abs(back.particles[i].cov - ens.particles[i].cov), 1e-12);
  }
}

TEST(Snapshot, MalformedInputThrows) {
  EXPECT_THROW((void)ipf::ensemble_from_json("{not json"), ipf::IoError);
  EXPECT_THROW((void)ipf::ensemble_from_json(R"({"step": 1})"), ipf::IoError);
}

}  // namespace
