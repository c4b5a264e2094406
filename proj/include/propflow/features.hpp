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

#include <string>
#include <vector>

#include "propflow/geometry.hpp"
#include "propflow/image.hpp"

namespace propflow {

// Appearance descriptor of one region. Only vectors with matching
// descriptor_id are comparable.
struct FeatureVec {
    std::vector<double> values;
    std::string descriptor_id;
};

enum class SimilarityKind { rectified_dot, chi2_kernel, l2_gaussian };

SimilarityKind similarity_kind_from_string(const std::string& name);
std::string to_string(SimilarityKind kind);

// Appearance term p(f -> f'); all kinds map into [0, 1].
//   rectified_dot: max(0, cosine), 0 when either norm is 0
//   chi2_kernel:   exp(-chi2 / temperature), nonnegative features only
//   l2_gaussian:   exp(-||f - g||^2 / temperature)
struct SimilarityFn {
    SimilarityKind kind = SimilarityKind::rectified_dot;
    double temperature = 1.0;

    double apply(const FeatureVec& f, const FeatureVec& g) const;
};

// Built-in gradient-orientation descriptor: the region is resampled to a
// grid*cell_px square patch, per-cell unsigned orientation histograms are
// collected, L2-normalized over overlapping 2x2 blocks, concatenated, and
// globally L2-normalized.
struct HogConfig {
    int grid = 8;    // cells per side
    int cell_px = 8; // pixels per cell side after resampling
    int bins = 9;    // unsigned orientation bins over [0, pi)

    int descriptor_length() const { return (grid - 1) * (grid - 1) * 4 * bins; }
    std::string descriptor_id() const;
};

FeatureVec hog_describe(const RasterImage& img, const Box& region,
                        const HogConfig& cfg = {});

// Flat binary feature file: magic "PFFT", u32 LE count, u32 LE dim,
// then count*dim f32 LE values, row per proposal.
void write_pfft(const std::string& path, const std::vector<std::vector<float>>& rows);
std::vector<std::vector<float>> read_pfft(const std::string& path);

} // namespace propflow
