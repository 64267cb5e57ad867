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

#include <cmath>
#include <limits>
#include <string>

#include <json.hpp>

#include "ipf/filters.hpp"
#include "ipf/gaussian.hpp"

namespace ipf {

std::string ensemble_to_json(const Ensemble& ens) {
  nlohmann::ordered_json doc;
  doc["step"] = ens.step;
  nlohmann::ordered_json particles = nlohmann::ordered_json::array();
  for (const Particle& p : ens.particles) {
    nlohmann::ordered_json jp;
    jp["state"] = std::vector<double>(p.state.data(), p.state.data() + p.state.size());
    if (std::isfinite(p.log_weight)) {
      jp["log_weight"] = p.log_weight;
    } else {
      jp["log_weight"] = nullptr;
    }
    const Matrix lower = spd_sqrt(p.cov);
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < lower.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(r) + 1);
      for (Eigen::Index c = 0; c <= r; ++c) {
        row[static_cast<std::size_t>(c)] = lower(r, c);
      }
      rows.push_back(std::move(row));
    }
    jp["cov_cholesky"] = std::move(rows);
    particles.push_back(std::move(jp));
  }
  doc["particles"] = std::move(particles);
  return doc.dump();
}

Ensemble ensemble_from_json(std::string_view text) {
  const nlohmann::json doc = nlohmann::json::parse(text.begin(), text.end(), nullptr, false);
  if (doc.is_discarded()) {
    throw IoError("malformed ensemble snapshot", "<json>");
  }
  try {
    Ensemble ens;
    ens.step = doc.at("step").get<int>();
    for (const auto& jp : doc.at("particles")) {
      Particle p;
      const auto state = jp.at("state").get<std::vector<double>>();
      p.state = Eigen::Map<const Vector>(state.data(), static_cast<Eigen::Index>(state.size()));
      const auto& lw = jp.at("log_weight");
      p.log_weight = lw.is_null() ? -std::numeric_limits<double>::infinity() : lw.get<double>();
      const auto rows = jp.at("cov_cholesky").get<std::vector<std::vector<double>>>();
      const auto n = static_cast<Eigen::Index>(rows.size());
      Matrix lower = Matrix::Zero(n, n);
      for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c <= r; ++c) {
          lower(r, c) = rows[static_cast<std::size_t>(r)].at(static_cast<std::size_t>(c));
        }
      }
      p.cov = lower * lower.transpose();
      ens.particles.push_back(std::move(p));
    }
    return ens;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad ensemble snapshot field: ") + e.what(), "<json>");
  }
}

}  // namespace ipf
