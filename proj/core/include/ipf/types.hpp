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

#ifndef IPF_TYPES_HPP
#define IPF_TYPES_HPP

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace ipf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model or model configuration violates its preconditions.
class InvalidModelError : public Error {
 public:
  using Error::Error;
};

/// Cholesky factorization failed even after the maximum jitter was added.
class SpdRepairError : public Error {
 public:
  SpdRepairError(const std::string& what, double epsilon) : Error(what), epsilon_(epsilon) {}

  /// Relative jitter of the last attempted factorization.
  [[nodiscard]] double epsilon() const noexcept { return epsilon_; }

 private:
  double epsilon_;
};

/// The innovation covariance could not be factored for a conditional update.
class ConditioningError : public Error {
 public:
  using Error::Error;
};

/// A user-supplied map produced a non-finite value.
class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, int component) : Error(what), component_(component) {}

  [[nodiscard]] int component() const noexcept { return component_; }

 private:
  int component_;
};

/// Every importance weight is zero.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

/// The implicit equation of the random map has no bracketed root.
class MapSolveError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(const std::string& what, std::string path) : Error(what + ": " + path), path_(std::move(path)) {}

  [[nodiscard]] const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// A filter could not continue; carries the time index of the failing step.
class FilterFatalError : public Error {
 public:
  FilterFatalError(const std::string& what, int step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  [[nodiscard]] int step() const noexcept { return step_; }

 private:
  int step_;
};

}  // namespace ipf

#endif  // IPF_TYPES_HPP
