// Copyright 2026 The Propflow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>

namespace propflow {

// Worker cap: PROPFLOW_THREADS when set (clamped to >= 1), otherwise the
// number of available cores.
unsigned worker_count();

// Runs fn over [0, n) split into contiguous chunks, one per worker.
// Only used for loops whose iterations write disjoint outputs, so the
// result is bit-identical to a sequential run.
void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t begin, std::size_t end)>& fn);

template <typename F>
void parallel_for(std::size_t n, F&& fn) {
    parallel_chunks(n, [&fn](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) fn(i);
    });
}

} // namespace propflow
