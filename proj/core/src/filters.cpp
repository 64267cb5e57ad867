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

#include "ipf/filters.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "ipf/parallel.hpp"

namespace ipf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> log_weights_of(const Ensemble& ens) {
  std::vector<double> lw(ens.size());
  for (std::size_t i = 0; i < ens.size(); ++i) {
    lw[i] = ens.particles[i].log_weight;
  }
  return lw;
}

bool should_resample(double ess_value, std::size_t n, double frac) {
  return frac >= 1.0 || ess_value < frac * static_cast<double>(n);
}

void require_nonempty(const Ensemble& ens) {
  if (ens.particles.empty()) {
    throw InvalidModelError("ensemble has no particles");
  }
}

// Normalizes the new log weights, then resamples when the ESS is low.
// `failed` flags particles whose per-particle work threw.
Ensemble finish_step(Ensemble next, const std::vector<char>& failed, const FilterOptions& options,
                     std::uint64_t seed) {
  int failures = 0;
  for (char f : failed) {
    failures += f != 0 ? 1 : 0;
  }
  const std::vector<double> normalized = normalize_log_weights(log_weights_of(next));
  for (std::size_t i = 0; i < next.size(); ++i) {
    next.particles[i].log_weight = normalized[i];
  }
  const double ess_value = ess(next.weights());
  const bool resample = should_resample(ess_value, next.size(), options.resample_threshold_frac);
  if (resample) {
    RandomStream rng(derive_seed(seed, StreamPurpose::kResample, {static_cast<std::uint64_t>(next.step)}));
    next = systematic_resample(next, rng);
  }
  next.diagnostics = StepDiagnostics{ess_value, resample, failures};
  return next;
}

Ensemble begin_step(const Ensemble& ens) {
  require_nonempty(ens);
  Ensemble next;
  next.particles.resize(ens.size());
  next.step = ens.step + 1;
  return next;
}

std::uint64_t particle_stream(std::uint64_t seed, StreamPurpose purpose, int step, std::size_t i) {
  return derive_seed(seed, purpose, {static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(i)});
}

// Dead particles are carried unchanged with zero weight.
bool carry_dead(const Particle& in, Particle& out) {
  if (std::isfinite(in.log_weight)) {
    return false;
  }
  out = in;
  out.log_weight = kNegInf;
  return true;
}

}  // namespace

std::vector<double> Ensemble::weights() const { return normalize_weights(log_weights_of(*this)); }

std::string_view to_string(FilterKind kind) noexcept {
  switch (kind) {
    case FilterKind::kEpf:
      return "EPF";
    case FilterKind::kUpf:
      return "UPF";
    case FilterKind::kEipf:
      return "E-IPF";
    case FilterKind::kUipf:
      return "U-IPF";
    case FilterKind::kIipf:
      return "I-IPF";
  }
  return "?";
}

std::optional<FilterKind> parse_filter_kind(std::string_view name) noexcept {
  for (FilterKind k : {FilterKind::kEpf, FilterKind::kUpf, FilterKind::kEipf, FilterKind::kUipf, FilterKind::kIipf}) {
    if (to_string(k) == name) {
      return k;
    }
  }
  return std::nullopt;
}

void FilterOptions::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw InvalidModelError("alpha must lie in [0, 1]");
  }
  if (!(resample_threshold_frac >= 0.0)) {
    throw InvalidModelError("resample threshold must be non-negative");
  }
  if (!(cov_inflation > 0.0)) {
    throw InvalidModelError("covariance inflation must be positive");
  }
}

Ensemble init_ensemble(int num_particles, const Vector& x0_est, const Matrix& P0, std::uint64_t seed) {
  if (num_particles < 1) {
    throw InvalidModelError("ensemble needs at least one particle");
  }
  const Matrix lower = spd_sqrt(P0);
  RandomStream rng(derive_seed(seed, StreamPurpose::kEnsembleInit));
  Ensemble ens;
  ens.particles.reserve(static_cast<std::size_t>(num_particles));
  const double lw = -std::log(static_cast<double>(num_particles));
  for (int i = 0; i < num_particles; ++i) {
    ens.particles.push_back(Particle{x0_est + lower * rng.normal_vector(x0_est.size()), lw, P0});
  }
  ens.diagnostics.ess = num_particles;
  return ens;
}

Ensemble kf_ipf_step(const Ensemble& ens, const Vector& y, const StateSpaceModel& model, KfBackend backend,
                     const FilterOptions& options, std::uint64_t seed) {
  Ensemble next = begin_step(ens);
  std::vector<char> failed(ens.size(), 0);
  const ReferenceSampler sampler(model.n_x(), options.alpha);

  parallel_for(ens.size(), options.threads, [&](std::size_t i) {
    const Particle& in = ens.particles[i];
    Particle& out = next.particles[i];
    if (carry_dead(in, out)) {
      return;
    }
    try {
      const PredictedMoments pred = kf_predict(backend, in.state, in.cov, model, options.ut);
      const GaussianMoments post = kf_update(pred, y);
      RandomStream rng(particle_stream(seed, StreamPurpose::kReference, next.step, i));
      const Vector xi = sample_reference(sampler, rng);
      out.state = map_particle(post, xi);
      out.log_weight = ipf_log_weight(in.log_weight, pred, y);
      out.cov = options.cov_inflation * post.cov;
    } catch (const Error&) {
      out = in;
      out.log_weight = kNegInf;
      failed[i] = 1;
    }
  });
  return finish_step(std::move(next), failed, options, seed);
}

Ensemble kf_pf_step(const Ensemble& ens, const Vector& y, const StateSpaceModel& model, KfBackend backend,
                    const FilterOptions& options, std::uint64_t seed) {
  Ensemble next = begin_step(ens);
  std::vector<char> failed(ens.size(), 0);
  const Matrix q_lower = model.Q_factor().matrixL();
  const Matrix r_lower = model.R_factor().matrixL();

  parallel_for(ens.size(), options.threads, [&](std::size_t i) {
    const Particle& in = ens.particles[i];
    Particle& out = next.particles[i];
    if (carry_dead(in, out)) {
      return;
    }
    try {
      const PredictedMoments pred = kf_predict(backend, in.state, in.cov, model, options.ut);
      const GaussianMoments post = kf_update(pred, y);
      const Cholesky chol = spd_factor(post.cov);
      const Matrix& lower = chol.matrixL();
      RandomStream rng(particle_stream(seed, StreamPurpose::kProposal, next.step, i));
      const Vector z = rng.normal_vector(model.n_x());
      const Vector x = post.mean + lower * z;

      const Vector prior_mean = backend == KfBackend::kEkf ? pred.m_bar : model.transition(in.state);
      const double log_lik = gaussian_logpdf_factored(y, model.measure(x), r_lower);
      const double log_trans = gaussian_logpdf_factored(x, prior_mean, q_lower);
      const double log_q = gaussian_logpdf_factored(x, post.mean, lower);
      const double lw = in.log_weight + log_lik + log_trans - log_q;
      if (!std::isfinite(lw)) {
        throw DegeneracyError("non-finite importance weight");
      }
      out.state = x;
      out.log_weight = lw;
      out.cov = options.cov_inflation * post.cov;
    } catch (const Error&) {
      out = in;
      out.log_weight = kNegInf;
      failed[i] = 1;
    }
  });
  return finish_step(std::move(next), failed, options, seed);
}

Ensemble iipf_step(const Ensemble& ens, const Vector& y, const StateSpaceModel& model, const FilterOptions& options,
                   std::uint64_t seed) {
  Ensemble next = begin_step(ens);
  std::vector<char> failed(ens.size(), 0);
  const ReferenceSampler sampler(model.n_x(), options.alpha);

  parallel_for(ens.size(), options.threads, [&](std::size_t i) {
    const Particle& in = ens.particles[i];
    Particle& out = next.particles[i];
    if (carry_dead(in, out)) {
      return;
    }
    try {
      const LogTarget target(model, in.state, y);
      const TargetMinimum minimum = minimize_log_target(target, target.prior_mean(), options.minimize);
      RandomStream rng(particle_stream(seed, StreamPurpose::kReference, next.step, i));
      const Vector xi = sample_reference(sampler, rng);
      const ImplicitSolution sol = random_map_solve(target, minimum, xi, options.alpha, options.random_map);
      if (!sol.converged || !std::isfinite(sol.log_jacobian)) {
        throw MapSolveError("random map did not converge");
      }
      out.state = sol.x;
      out.log_weight = in.log_weight + sol.log_jacobian - sol.phi;
      out.cov = sol.mode_covariance;
    } catch (const Error&) {
      out = in;
      out.log_weight = kNegInf;
      failed[i] = 1;
    }
  });
  return finish_step(std::move(next), failed, options, seed);
}

double ess(std::span<const double> weights) {
  double sum_sq = 0.0;
  for (double w : weights) {
    sum_sq += w * w;
  }
  return 1.0 / sum_sq;
}

std::vector<int> systematic_resample_indices(std::span<const double> weights, double offset) {
  const std::size_t n = weights.size();
  std::vector<int> counts(n, 0);
  if (n == 0) {
    return counts;
  }
  double cumulative = weights[0];
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (static_cast<double>(i) + offset) / static_cast<double>(n);
    while (j + 1 < n && cumulative <= u) {
      ++j;
      cumulative += weights[j];
    }
    ++counts[j];
  }
  return counts;
}

Ensemble systematic_resample(const Ensemble& ens, RandomStream& rng) {
  require_nonempty(ens);
  const std::vector<double> w = ens.weights();
  const std::vector<int> counts = systematic_resample_indices(w, rng.uniform(0.0, 1.0));
  Ensemble out;
  out.step = ens.step;
  out.diagnostics = ens.diagnostics;
  out.particles.reserve(ens.size());
  const double lw = -std::log(static_cast<double>(ens.size()));
  for (std::size_t i = 0; i < ens.size(); ++i) {
    for (int c = 0; c < counts[i]; ++c) {
      out.particles.push_back(Particle{ens.particles[i].state, lw, ens.particles[i].cov});
    }
  }
  return out;
}

Vector estimate(const Ensemble& ens) {
  require_nonempty(ens);
  const std::vector<double> w = ens.weights();
  Vector x = Vector::Zero(ens.particles.front().state.size());
  for (std::size_t i = 0; i < ens.size(); ++i) {
    if (w[i] > 0.0) {
      x += w[i] * ens.particles[i].state;
    }
  }
  return x;
}

Filter::Filter(FilterKind kind, const StateSpaceModel& model, FilterOptions options)
    : kind_(kind), model_(&model), options_(std::move(options)) {
  options_.validate();
  if (kind_ == FilterKind::kUpf || kind_ == FilterKind::kUipf) {
    options_.ut.validate(model.n_x());
  }
  if (kind_ == FilterKind::kIipf && !(options_.alpha > 0.0)) {
    throw InvalidModelError("I-IPF needs alpha > 0");
  }
}

Ensemble Filter::step(const Ensemble& ens, const Vector& y, std::uint64_t seed) const {
  switch (kind_) {
    case FilterKind::kEpf:
      return kf_pf_step(ens, y, *model_, KfBackend::kEkf, options_, seed);
    case FilterKind::kUpf:
      return kf_pf_step(ens, y, *model_, KfBackend::kUkf, options_, seed);
    case FilterKind::kEipf:
      return kf_ipf_step(ens, y, *model_, KfBackend::kEkf, options_, seed);
    case FilterKind::kUipf:
      return kf_ipf_step(ens, y, *model_, KfBackend::kUkf, options_, seed);
    case FilterKind::kIipf:
      return iipf_step(ens, y, *model_, options_, seed);
  }
  throw InvalidModelError("unknown filter kind");
}

}  // namespace ipf
