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

#include "ipf/bench.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "io_util.hpp"
#include "ipf/parallel.hpp"

namespace ipf {

namespace {

using Json = nlohmann::ordered_json;

std::string_view to_string(JacobianSource src) {
  return src == JacobianSource::kAnalytic ? "analytic" : "finite_difference";
}

std::string_view to_string(LogJacobianMethod m) {
  return m == LogJacobianMethod::kClosedForm ? "closed_form" : "finite_difference";
}

template <typename T>
T get_field(const nlohmann::json& obj, const char* key, const T& fallback) {
  if (!obj.contains(key)) {
    return fallback;
  }
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> known, const std::string& where) {
  if (!obj.is_object()) {
    throw ConfigError(where + " must be a JSON object");
  }
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) {
      ok = ok || key == k;
    }
    if (!ok) {
      throw ConfigError("unknown field '" + key + "' in " + where);
    }
  }
}

}  // namespace

std::vector<FilterSpec> default_roster() {
  return {{FilterKind::kEpf, 1000},
          {FilterKind::kEipf, 1000},
          {FilterKind::kUpf, 100},
          {FilterKind::kIipf, 100},
          {FilterKind::kUipf, 10}};
}

void ExperimentConfig::validate() const {
  try {
    model.validate();
  } catch (const InvalidModelError& e) {
    throw ConfigError(e.what());
  }
  if (model.n_x % 2 != 0) {
    throw ConfigError("model.n_x must be even for the partial measurement");
  }
  if (!(model.noise_halfwidth > 0.0)) {
    throw ConfigError("model.noise_halfwidth must be positive");
  }
  if (T < 0) {
    throw ConfigError("T must be non-negative");
  }
  if (n_mc < 1) {
    throw ConfigError("n_mc must be at least 1");
  }
  for (const FilterSpec& f : filters) {
    if (f.particles < 1) {
      throw ConfigError("every filter needs at least one particle");
    }
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw ConfigError("alpha must lie in (0, 1]");
  }
  if (!(resample_threshold_frac >= 0.0)) {
    throw ConfigError("resample_threshold_frac must be non-negative");
  }
  if (init_bias.size() != 1 && init_bias.size() != static_cast<std::size_t>(model.n_x)) {
    throw ConfigError("init_bias must have 1 or n_x entries");
  }
  if (!(init_spread >= 0.0)) {
    throw ConfigError("init_spread must be non-negative");
  }
  if (!(cov_inflation > 0.0)) {
    throw ConfigError("cov_inflation must be positive");
  }
  if (spinup_steps < 0) {
    throw ConfigError("spinup_steps must be non-negative");
  }
  try {
    ut.validate(model.n_x);
  } catch (const InvalidModelError& e) {
    throw ConfigError(e.what());
  }
}

Vector ExperimentConfig::bias_vector() const {
  if (init_bias.size() == 1) {
    return Vector::Constant(model.n_x, init_bias.front());
  }
  return Eigen::Map<const Vector>(init_bias.data(), static_cast<Eigen::Index>(init_bias.size()));
}

FilterOptions ExperimentConfig::filter_options() const {
  FilterOptions opts;
  opts.alpha = alpha;
  opts.ut = ut;
  opts.resample_threshold_frac = resample_threshold_frac;
  opts.cov_inflation = cov_inflation;
  opts.random_map.log_jacobian = log_jacobian;
  return opts;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return a.model.n_x == b.model.n_x && a.model.forcing == b.model.forcing && a.model.dt == b.model.dt &&
         a.model.noise_halfwidth == b.model.noise_halfwidth && a.T == b.T && a.n_mc == b.n_mc &&
         a.filters == b.filters && a.alpha == b.alpha && a.resample_threshold_frac == b.resample_threshold_frac &&
         a.init_bias == b.init_bias && a.init_spread == b.init_spread && a.master_seed == b.master_seed &&
         a.ut.alpha_ut == b.ut.alpha_ut && a.ut.beta_ut == b.ut.beta_ut && a.ut.kappa_ut == b.ut.kappa_ut &&
         a.cov_inflation == b.cov_inflation && a.jacobian == b.jacobian && a.log_jacobian == b.log_jacobian &&
         a.spinup_steps == b.spinup_steps;
}

namespace {

Json config_json(const ExperimentConfig& cfg) {
  Json j;
  j["model"] = {{"n_x", cfg.model.n_x},
                {"F", cfg.model.forcing},
                {"dt", cfg.model.dt},
                {"noise_halfwidth", cfg.model.noise_halfwidth}};
  j["T"] = cfg.T;
  j["n_mc"] = cfg.n_mc;
  Json filters = Json::array();
  for (const FilterSpec& f : cfg.filters) {
    filters.push_back({{"kind", std::string(to_string(f.kind))}, {"particles", f.particles}});
  }
  j["filters"] = std::move(filters);
  j["alpha"] = cfg.alpha;
  j["resample_threshold_frac"] = cfg.resample_threshold_frac;
  j["init_bias"] = cfg.init_bias;
  j["init_spread"] = cfg.init_spread;
  j["master_seed"] = cfg.master_seed;
  j["ut"] = {{"alpha", cfg.ut.alpha_ut}, {"beta", cfg.ut.beta_ut}, {"kappa", cfg.ut.kappa_ut}};
  j["cov_inflation"] = cfg.cov_inflation;
  j["jacobian"] = std::string(to_string(cfg.jacobian));
  j["log_jacobian"] = std::string(to_string(cfg.log_jacobian));
  j["spinup_steps"] = cfg.spinup_steps;
  return j;
}

ExperimentConfig config_from(const nlohmann::json& j) {
  reject_unknown(j,
                 {"model", "T", "n_mc", "filters", "alpha", "resample_threshold_frac", "init_bias", "init_spread",
                  "master_seed", "ut", "cov_inflation", "jacobian", "log_jacobian", "spinup_steps"},
                 "config");
  ExperimentConfig cfg;
  if (j.contains("model")) {
    const auto& m = j.at("model");
    reject_unknown(m, {"n_x", "F", "dt", "noise_halfwidth"}, "model");
    cfg.model.n_x = get_field(m, "n_x", cfg.model.n_x);
    cfg.model.forcing = get_field(m, "F", cfg.model.forcing);
    cfg.model.dt = get_field(m, "dt", cfg.model.dt);
    cfg.model.noise_halfwidth = get_field(m, "noise_halfwidth", cfg.model.noise_halfwidth);
  }
  cfg.T = get_field(j, "T", cfg.T);
  cfg.n_mc = get_field(j, "n_mc", cfg.n_mc);
  if (j.contains("filters")) {
    if (!j.at("filters").is_array()) {
      throw ConfigError("filters must be an array");
    }
    cfg.filters.clear();
    for (const auto& f : j.at("filters")) {
      reject_unknown(f, {"kind", "particles"}, "filters[]");
      const auto name = get_field<std::string>(f, "kind", "");
      const auto kind = parse_filter_kind(name);
      if (!kind) {
        throw ConfigError("unknown filter kind '" + name + "'");
      }
      if (!f.contains("particles")) {
        throw ConfigError("filter '" + name + "' is missing 'particles'");
      }
      cfg.filters.push_back({*kind, get_field(f, "particles", 0)});
    }
  }
  cfg.alpha = get_field(j, "alpha", cfg.alpha);
  cfg.resample_threshold_frac = get_field(j, "resample_threshold_frac", cfg.resample_threshold_frac);
  if (j.contains("init_bias") && j.at("init_bias").is_number()) {
    cfg.init_bias = {j.at("init_bias").get<double>()};
  } else {
    cfg.init_bias = get_field(j, "init_bias", cfg.init_bias);
  }
  cfg.init_spread = get_field(j, "init_spread", cfg.init_spread);
  cfg.master_seed = get_field(j, "master_seed", cfg.master_seed);
  if (j.contains("ut")) {
    const auto& u = j.at("ut");
    reject_unknown(u, {"alpha", "beta", "kappa"}, "ut");
    cfg.ut.alpha_ut = get_field(u, "alpha", cfg.ut.alpha_ut);
    cfg.ut.beta_ut = get_field(u, "beta", cfg.ut.beta_ut);
    cfg.ut.kappa_ut = get_field(u, "kappa", cfg.ut.kappa_ut);
  }
  cfg.cov_inflation = get_field(j, "cov_inflation", cfg.cov_inflation);
  const auto jac = get_field<std::string>(j, "jacobian", std::string(to_string(cfg.jacobian)));
  if (jac == "analytic") {
    cfg.jacobian = JacobianSource::kAnalytic;
  } else if (jac == "finite_difference") {
    cfg.jacobian = JacobianSource::kFiniteDifference;
  } else {
    throw ConfigError("jacobian must be 'analytic' or 'finite_difference'");
  }
  const auto logjac = get_field<std::string>(j, "log_jacobian", std::string(to_string(cfg.log_jacobian)));
  if (logjac == "closed_form") {
    cfg.log_jacobian = LogJacobianMethod::kClosedForm;
  } else if (logjac == "finite_difference") {
    cfg.log_jacobian = LogJacobianMethod::kFiniteDifference;
  } else {
    throw ConfigError("log_jacobian must be 'closed_form' or 'finite_difference'");
  }
  cfg.spinup_steps = get_field(j, "spinup_steps", cfg.spinup_steps);
  cfg.validate();
  return cfg;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

ExperimentConfig config_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw ConfigError("config is not valid JSON");
  }
  return config_from(j);
}

ExperimentConfig load_config(const std::string& path) { return config_from_json(detail::read_file(path)); }

std::vector<double> rmse_series(const std::vector<Vector>& estimates, const std::vector<Vector>& truth) {
  if (estimates.size() != truth.size()) {
    throw ConfigError("rmse: estimate and truth series have different lengths");
  }
  std::vector<double> out(estimates.size());
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    if (estimates[k].size() != truth[k].size() || truth[k].size() == 0) {
      throw ConfigError("rmse: state dimension mismatch at step " + std::to_string(k + 1));
    }
    out[k] = std::sqrt((estimates[k] - truth[k]).squaredNorm() / static_cast<double>(truth[k].size()));
  }
  return out;
}

RunSeeds seeds_from(std::uint64_t seed) noexcept {
  return {derive_seed(seed, StreamPurpose::kTruth), derive_seed(seed, StreamPurpose::kFilter)};
}

TruthRun simulate_run_truth(const ExperimentConfig& cfg, const StateSpaceModel& model, std::uint64_t truth_seed) {
  const Vector x0 = lorenz96_initial_state(cfg.model, truth_seed, cfg.spinup_steps);
  return {simulate_truth(model, x0, cfg.T, truth_seed)};
}

RunResult run_filter(const ExperimentConfig& cfg, const StateSpaceModel& model, const FilterSpec& spec,
                     const Trajectory& truth, std::uint64_t filter_seed, int threads) {
  FilterOptions opts = cfg.filter_options();
  opts.threads = threads;
  const Filter filter(spec.kind, model, opts);

  const auto start = std::chrono::steady_clock::now();
  const Vector x0_est = truth.states.front() + cfg.bias_vector();
  const Matrix P0 = cfg.init_spread * Matrix::Identity(cfg.model.n_x, cfg.model.n_x);
  Ensemble ens = init_ensemble(spec.particles, x0_est, P0, filter_seed);

  RunResult result;
  result.estimates.reserve(truth.measurements.size());
  for (std::size_t k = 0; k < truth.measurements.size(); ++k) {
    try {
      ens = filter.step(ens, truth.measurements[k], filter_seed);
    } catch (const Error& e) {
      throw FilterFatalError(std::string(to_string(spec.kind)) + ": " + e.what(), static_cast<int>(k) + 1);
    }
    result.resample_count += ens.diagnostics.resampled ? 1 : 0;
    result.estimates.push_back(estimate(ens));
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const std::vector<Vector> states(truth.states.begin() + 1, truth.states.end());
  result.rmse = rmse_series(result.estimates, states);
  return result;
}

namespace {

StateSpaceModel bench_model(const ExperimentConfig& cfg) {
  Lorenz96ModelOptions opts;
  opts.jacobian = cfg.jacobian;
  return make_lorenz96_model(cfg.model, opts);
}

}  // namespace

RunResult run_single(const ExperimentConfig& cfg, const FilterSpec& spec, const RunSeeds& seeds, int threads) {
  cfg.validate();
  const StateSpaceModel model = bench_model(cfg);
  const TruthRun truth = simulate_run_truth(cfg, model, seeds.truth);
  return run_filter(cfg, model, spec, truth.trajectory, seeds.filter, threads);
}

RunResult run_single(const ExperimentConfig& cfg, FilterKind kind, int particles, std::uint64_t seed, int threads) {
  return run_single(cfg, FilterSpec{kind, particles}, seeds_from(seed), threads);
}

std::uint64_t truth_run_seed(std::uint64_t master_seed, int run) noexcept {
  return derive_seed(master_seed, StreamPurpose::kTruth, {static_cast<std::uint64_t>(run)});
}

std::uint64_t filter_run_seed(std::uint64_t master_seed, std::size_t filter_index, int run) noexcept {
  return derive_seed(master_seed, StreamPurpose::kFilter,
                     {static_cast<std::uint64_t>(filter_index), static_cast<std::uint64_t>(run)});
}

bool RunReport::any_failed() const {
  for (const FilterReport& f : filters) {
    if (f.failed) {
      return true;
    }
  }
  return false;
}

void aggregate_rmse(FilterReport& report) {
  const std::size_t runs = report.rmse_runs.size();
  const std::size_t T = runs == 0 ? 0 : report.rmse_runs.front().size();
  report.rmse_mean.assign(T, 0.0);
  report.rmse_std.assign(T, 0.0);
  if (runs == 0) {
    return;
  }
  for (std::size_t k = 0; k < T; ++k) {
    double sum = 0.0;
    for (const auto& run : report.rmse_runs) {
      sum += run[k];
    }
    const double mean = sum / static_cast<double>(runs);
    double sq = 0.0;
    for (const auto& run : report.rmse_runs) {
      sq += (run[k] - mean) * (run[k] - mean);
    }
    report.rmse_mean[k] = mean;
    report.rmse_std[k] = std::sqrt(sq / static_cast<double>(runs));
  }
}

std::vector<std::string> filter_labels(const std::vector<FilterSpec>& specs) {
  std::vector<std::string> labels;
  labels.reserve(specs.size());
  for (const FilterSpec& s : specs) {
    int same_kind = 0;
    for (const FilterSpec& t : specs) {
      same_kind += t.kind == s.kind ? 1 : 0;
    }
    std::string label(to_string(s.kind));
    if (same_kind > 1) {
      label += "(" + std::to_string(s.particles) + ")";
    }
    labels.push_back(std::move(label));
  }
  return labels;
}

RunReport run_monte_carlo(const ExperimentConfig& cfg, int threads) {
  cfg.validate();
  const StateSpaceModel model = bench_model(cfg);

  RunReport report;
  report.config = cfg;
  report.threads = std::max(threads, 1);
  for (int r = 0; r < cfg.n_mc; ++r) {
    report.truth_seeds.push_back(truth_run_seed(cfg.master_seed, r));
  }

  std::vector<TruthRun> truths(static_cast<std::size_t>(cfg.n_mc));
  parallel_for(truths.size(), report.threads, [&](std::size_t r) {
    truths[r] = simulate_run_truth(cfg, model, report.truth_seeds[r]);
  });

  const std::size_t n_filters = cfg.filters.size();
  const std::size_t n_runs = static_cast<std::size_t>(cfg.n_mc);
  struct Slot {
    RunResult result;
    bool ok = false;
  };
  std::vector<Slot> slots(n_filters * n_runs);
  parallel_for(slots.size(), report.threads, [&](std::size_t task) {
    const std::size_t f = task / n_runs;
    const int r = static_cast<int>(task % n_runs);
    try {
      slots[task].result = run_filter(cfg, model, cfg.filters[f], truths[static_cast<std::size_t>(r)].trajectory,
                                      filter_run_seed(cfg.master_seed, f, r), 1);
      slots[task].ok = true;
    } catch (const FilterFatalError&) {
      slots[task].ok = false;
    }
  });

  const std::vector<std::string> labels = filter_labels(cfg.filters);
  for (std::size_t f = 0; f < n_filters; ++f) {
    FilterReport fr;
    fr.spec = cfg.filters[f];
    fr.label = labels[f];
    double seconds = 0.0;
    for (std::size_t r = 0; r < n_runs; ++r) {
      fr.seeds.push_back(filter_run_seed(cfg.master_seed, f, static_cast<int>(r)));
      Slot& slot = slots[f * n_runs + r];
      if (!slot.ok) {
        ++fr.failures;
        continue;
      }
      fr.rmse_runs.push_back(std::move(slot.result.rmse));
      fr.run_seconds.push_back(slot.result.seconds);
      seconds += slot.result.seconds;
    }
    fr.mean_seconds = fr.run_seconds.empty() ? 0.0 : seconds / static_cast<double>(fr.run_seconds.size());
    fr.failed = static_cast<double>(fr.failures) > 0.1 * static_cast<double>(n_runs);
    aggregate_rmse(fr);
    if (fr.rmse_runs.empty()) {
      fr.rmse_mean.assign(static_cast<std::size_t>(cfg.T), 0.0);
      fr.rmse_std.assign(static_cast<std::size_t>(cfg.T), 0.0);
    }
    report.filters.push_back(std::move(fr));
  }
  return report;
}

std::string rmse_csv(const RunReport& report) {
  std::string out = "k";
  for (const FilterReport& f : report.filters) {
    out += "," + f.label + "_mean," + f.label + "_std";
  }
  out += '\n';
  if (report.filters.empty()) {
    return out;
  }
  for (int k = 1; k <= report.config.T; ++k) {
    out += std::to_string(k);
    for (const FilterReport& f : report.filters) {
      const auto idx = static_cast<std::size_t>(k - 1);
      out += ',' + detail::format_double(f.rmse_mean[idx]) + ',' + detail::format_double(f.rmse_std[idx]);
    }
    out += '\n';
  }
  return out;
}

std::string timing_csv(const RunReport& report) {
  std::string out = "filter,N,mean_seconds\n";
  for (const FilterReport& f : report.filters) {
    out += f.label + ',' + std::to_string(f.spec.particles) + ',' + detail::format_double(f.mean_seconds) + '\n';
  }
  return out;
}

void emit_report(const RunReport& report, const std::string& dir) {
  detail::ensure_directory(dir);
  const std::filesystem::path base(dir);
  detail::write_file((base / "rmse.csv").string(), rmse_csv(report));
  detail::write_file((base / "timing.csv").string(), timing_csv(report));

  Json doc;
  doc["config"] = config_json(report.config);
  doc["threads"] = report.threads;
  doc["truth_seeds"] = report.truth_seeds;
  Json filters = Json::array();
  for (const FilterReport& f : report.filters) {
    Json jf;
    jf["label"] = f.label;
    jf["kind"] = std::string(to_string(f.spec.kind));
    jf["particles"] = f.spec.particles;
    jf["seeds"] = f.seeds;
    jf["failures"] = f.failures;
    jf["failed"] = f.failed;
    jf["mean_seconds"] = f.mean_seconds;
    jf["run_seconds"] = f.run_seconds;
    filters.push_back(std::move(jf));
  }
  doc["filters"] = std::move(filters);
  detail::write_file((base / "report.json").string(), doc.dump(2) + "\n");
}

ExperimentConfig read_report_config(const std::string& path) {
  const nlohmann::json doc = nlohmann::json::parse(detail::read_file(path), nullptr, false);
  if (doc.is_discarded() || !doc.contains("config")) {
    throw IoError("malformed report", path);
  }
  return config_from(doc.at("config"));
}

}  // namespace ipf
