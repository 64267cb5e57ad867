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

#ifndef IPF_RNG_HPP
#define IPF_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

#include "ipf/types.hpp"

namespace ipf {

/// Purposes that key independent random sub-streams.
enum class StreamPurpose : std::uint64_t {
  kProcessNoise = 1,
  kMeasurementNoise = 2,
  kInitialState = 3,
  kEnsembleInit = 4,
  kReference = 5,
  kProposal = 6,
  kResample = 7,
  kTruth = 8,
  kFilter = 9,
  kMonteCarloRun = 10,
};

[[nodiscard]] std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Hashes a seed together with a sequence of counters into a new seed.
///
/// Used to build counter-based sub-streams keyed by (purpose, step, particle),
/// so that results never depend on the order in which streams are consumed.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept;

[[nodiscard]] inline std::uint64_t derive_seed(std::uint64_t seed, StreamPurpose purpose,
                                               std::initializer_list<std::uint64_t> keys = {}) noexcept {
  std::uint64_t s = derive_seed(seed, {static_cast<std::uint64_t>(purpose)});
  return keys.size() == 0 ? s : derive_seed(s, keys);
}

/// Seeded random stream. Not thread safe; use one per task.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }

  /// Standard normal vector of length n.
  Vector normal_vector(Eigen::Index n);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace ipf

#endif  // IPF_RNG_HPP
