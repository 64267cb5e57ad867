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

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "io_util.hpp"
#include "ipf/models.hpp"

namespace ipf {

namespace fs = std::filesystem;

void write_trajectory(const std::string& dir, const Trajectory& trajectory, const Lorenz96Config& cfg) {
  detail::ensure_directory(dir);
  const Eigen::Index n_x = trajectory.states.empty() ? 0 : trajectory.states.front().size();
  const Eigen::Index n_y = trajectory.measurements.empty() ? cfg.n_y() : trajectory.measurements.front().size();

  std::string csv = "k";
  for (Eigen::Index j = 1; j <= n_x; ++j) {
    csv += ",x_" + std::to_string(j);
  }
  for (Eigen::Index l = 1; l <= n_y; ++l) {
    csv += ",y_" + std::to_string(l);
  }
  csv += '\n';
  for (std::size_t k = 0; k < trajectory.states.size(); ++k) {
    csv += std::to_string(k);
    for (Eigen::Index j = 0; j < n_x; ++j) {
      csv += ',';
      csv += detail::format_double(trajectory.states[k][j]);
    }
    for (Eigen::Index l = 0; l < n_y; ++l) {
      csv += ',';
      if (k > 0) {
        csv += detail::format_double(trajectory.measurements[k - 1][l]);
      }
    }
    csv += '\n';
  }
  detail::write_file((fs::path(dir) / "trajectory.csv").string(), csv);

  nlohmann::ordered_json sidecar;
  sidecar["model"] = {{"n_x", cfg.n_x}, {"F", cfg.forcing}, {"dt", cfg.dt}, {"noise_halfwidth", cfg.noise_halfwidth}};
  sidecar["T"] = trajectory.steps();
  sidecar["seed"] = trajectory.seed;
  detail::write_file((fs::path(dir) / "trajectory.json").string(), sidecar.dump(2) + "\n");
}

Trajectory read_trajectory(const std::string& dir) {
  const std::string csv_path = (fs::path(dir) / "trajectory.csv").string();
  const std::string json_path = (fs::path(dir) / "trajectory.json").string();
  const nlohmann::json sidecar = nlohmann::json::parse(detail::read_file(json_path), nullptr, false);
  if (sidecar.is_discarded()) {
    throw IoError("malformed trajectory sidecar", json_path);
  }
  const int n_x = sidecar.at("model").at("n_x").get<int>();

  std::istringstream in(detail::read_file(csv_path));
  std::string line;
  std::getline(in, line);
  int columns = 0;
  for (char c : line) {
    columns += c == ',' ? 1 : 0;
  }
  const int n_y = columns - n_x;

  Trajectory traj;
  traj.seed = sidecar.at("seed").get<std::uint64_t>();
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) {
      cells.push_back(cell);
    }
    cells.resize(static_cast<std::size_t>(1 + n_x + n_y));
    Vector x(n_x);
    for (int j = 0; j < n_x; ++j) {
      x[j] = std::stod(cells[static_cast<std::size_t>(1 + j)]);
    }
    traj.states.push_back(std::move(x));
    if (!cells[static_cast<std::size_t>(1 + n_x)].empty()) {
      Vector y(n_y);
      for (int l = 0; l < n_y; ++l) {
        y[l] = std::stod(cells[static_cast<std::size_t>(1 + n_x + l)]);
      }
      traj.measurements.push_back(std::move(y));
    }
  }
  return traj;
}

}  // namespace ipf
