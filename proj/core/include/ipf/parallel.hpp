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

#ifndef IPF_PARALLEL_HPP
#define IPF_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace ipf {

/// Thread count from the IPF_THREADS environment variable, falling back to
/// the hardware concurrency. Always at least 1.
[[nodiscard]] int default_thread_count();

/// Runs body(i) for i in [0, n) on up to `threads` worker threads.
///
/// Indices are handed out one at a time; callers write results into
/// preallocated slots so the output never depends on the schedule. The first
/// exception thrown by any worker is rethrown on the calling thread.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

}  // namespace ipf

#endif  // IPF_PARALLEL_HPP
