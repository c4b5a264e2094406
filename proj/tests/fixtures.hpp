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

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "propflow/proposals.hpp"
#include "propflow/rng.hpp"

namespace fixtures {

inline std::vector<double> random_unit(propflow::SplitMix64& rng, uint32_t dim) {
    std::vector<double> v(dim);
    double norm2 = 0.0;
    for (auto& c : v) {
        c = rng.next_gaussian();
        norm2 += c * c;
    }
    for (auto& c : v) c /= std::sqrt(norm2);
    return v;
}

// A proposal set with random boxes and random unit features, confined to
// a width x height image.
inline propflow::ProposalSet random_set(uint64_t seed, std::size_t count,
                                        uint32_t width = 200, uint32_t height = 150,
                                        uint32_t dim = 8) {
    propflow::SplitMix64 rng(seed);
    propflow::ProposalSet set;
    set.image_width = width;
    set.image_height = height;
    set.descriptor_id = "fix-d" + std::to_string(dim);
    for (std::size_t i = 0; i < count; ++i) {
        propflow::Region r;
        r.id = static_cast<uint32_t>(i);
        r.box.w = rng.next_range(5.0, width * 0.45);
        r.box.h = rng.next_range(5.0, height * 0.45);
        r.box.x = rng.next_range(0.0, width - r.box.w);
        r.box.y = rng.next_range(0.0, height - r.box.h);
        r.feature.descriptor_id = set.descriptor_id;
        r.feature.values = random_unit(rng, dim);
        set.regions.push_back(std::move(r));
    }
    return set;
}

// Unique scratch directory under the system temp root.
inline std::string temp_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path() /
                     ("propflow_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    return dir.string();
}

} // namespace fixtures
