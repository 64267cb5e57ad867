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

#ifndef IPF_SRC_IO_UTIL_HPP
#define IPF_SRC_IO_UTIL_HPP

#include <string>

namespace ipf::detail {

/// Shortest representation that parses back to the same double.
std::string format_double(double value);

void ensure_directory(const std::string& dir);
void write_file(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace ipf::detail

#endif  // IPF_SRC_IO_UTIL_HPP
