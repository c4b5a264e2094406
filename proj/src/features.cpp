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

#include "propflow/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace propflow {

SimilarityKind similarity_kind_from_string(const std::string& name) {
    if (name == "rectified_dot") return SimilarityKind::rectified_dot;
    if (name == "chi2_kernel") return SimilarityKind::chi2_kernel;
    if (name == "l2_gaussian") return SimilarityKind::l2_gaussian;
    fail("ConfigError", "unknown similarity kind '" + name + "'");
}

std::string to_string(SimilarityKind kind) {
    switch (kind) {
        case SimilarityKind::rectified_dot: return "rectified_dot";
        case SimilarityKind::chi2_kernel: return "chi2_kernel";
        case SimilarityKind::l2_gaussian: return "l2_gaussian";
    }
    return "?";
}

namespace {

void check_comparable(const FeatureVec& f, const FeatureVec& g) {
    if (f.descriptor_id != g.descriptor_id)
        fail("DescriptorMismatch", "'" + f.descriptor_id + "' vs '" + g.descriptor_id + "'");
    if (f.values.size() != g.values.size())
        fail("DescriptorMismatch", "feature lengths differ (" +
                                       std::to_string(f.values.size()) + " vs " +
                                       std::to_string(g.values.size()) + ")");
}

} // namespace

double SimilarityFn::apply(const FeatureVec& f, const FeatureVec& g) const {
    check_comparable(f, g);
    if (kind != SimilarityKind::rectified_dot && temperature <= 0.0)
        fail("ConfigError", "similarity temperature must be > 0");
    const std::size_t n = f.values.size();
    switch (kind) {
        case SimilarityKind::rectified_dot: {
            double dot = 0.0, nf = 0.0, ng = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                dot += f.values[i] * g.values[i];
                nf += f.values[i] * f.values[i];
                ng += g.values[i] * g.values[i];
            }
            if (nf == 0.0 || ng == 0.0) return 0.0;
            return std::max(0.0, dot / (std::sqrt(nf) * std::sqrt(ng)));
        }
        case SimilarityKind::chi2_kernel: {
            constexpr double eps = 1e-12;
            double chi2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (f.values[i] < 0.0 || g.values[i] < 0.0)
                    fail("NegativeFeature", "chi2_kernel requires nonnegative features");
                const double d = f.values[i] - g.values[i];
                chi2 += 0.5 * d * d / (f.values[i] + g.values[i] + eps);
            }
            return std::exp(-chi2 / temperature);
        }
        case SimilarityKind::l2_gaussian: {
            double d2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = f.values[i] - g.values[i];
                d2 += d * d;
            }
            return std::exp(-d2 / temperature);
        }
    }
    return 0.0;
}

std::string HogConfig::descriptor_id() const {
    return "hog-g" + std::to_string(grid) + "c" + std::to_string(cell_px) + "b" +
           std::to_string(bins);
}

FeatureVec hog_describe(const RasterImage& img, const Box& region, const HogConfig& cfg) {
    const Box image_rect{0.0, 0.0, static_cast<double>(img.width),
                         static_cast<double>(img.height)};
    if (intersection_area(region, image_rect) <= 0.0)
        fail("RegionOutsideImage", "region does not intersect the image");

    const int side = cfg.grid * cfg.cell_px;
    const std::vector<double> lum = to_luminance(img);

    // Resample the region to a fixed square patch (edge-clamped bilinear).
    std::vector<double> patch(static_cast<std::size_t>(side) * side);
    for (int py = 0; py < side; ++py) {
        for (int px = 0; px < side; ++px) {
            const double sx = region.x + (px + 0.5) * region.w / side - 0.5;
            const double sy = region.y + (py + 0.5) * region.h / side - 0.5;
            patch[static_cast<std::size_t>(py) * side + px] =
                bilinear_sample(lum, img.width, img.height, sx, sy);
        }
    }

    // Per-cell unsigned orientation histograms of gradient magnitude.
    const int G = cfg.grid;
    const int B = cfg.bins;
    std::vector<double> cells(static_cast<std::size_t>(G) * G * B, 0.0);
    auto patch_at = [&](int x, int y) {
        x = std::clamp(x, 0, side - 1);
        y = std::clamp(y, 0, side - 1);
        return patch[static_cast<std::size_t>(y) * side + x];
    };
    for (int py = 0; py < side; ++py) {
        for (int px = 0; px < side; ++px) {
            const double gx = patch_at(px + 1, py) - patch_at(px - 1, py);
            const double gy = patch_at(px, py + 1) - patch_at(px, py - 1);
            const double mag = std::sqrt(gx * gx + gy * gy);
            if (mag == 0.0) continue;
            double theta = std::atan2(gy, gx);
            if (theta < 0.0) theta += std::numbers::pi;
            if (theta >= std::numbers::pi) theta = 0.0;
            int bin = static_cast<int>(theta / std::numbers::pi * B);
            bin = std::min(bin, B - 1);
            const int cell = (py / cfg.cell_px) * G + (px / cfg.cell_px);
            cells[static_cast<std::size_t>(cell) * B + bin] += mag;
        }
    }

    // Overlapping 2x2 block normalization, then a global L2 pass. The L2
    // norm of an all-zero vector is left as zero.
    FeatureVec out;
    out.descriptor_id = cfg.descriptor_id();
    out.values.reserve(static_cast<std::size_t>(cfg.descriptor_length()));
    for (int by = 0; by + 1 < G; ++by) {
        for (int bx = 0; bx + 1 < G; ++bx) {
            const int corners[4] = {by * G + bx, by * G + bx + 1,
                                    (by + 1) * G + bx, (by + 1) * G + bx + 1};
            double norm2 = 0.0;
            for (int c : corners)
                for (int b = 0; b < B; ++b) {
                    const double v = cells[static_cast<std::size_t>(c) * B + b];
                    norm2 += v * v;
                }
            const double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
            for (int c : corners)
                for (int b = 0; b < B; ++b)
                    out.values.push_back(cells[static_cast<std::size_t>(c) * B + b] * inv);
        }
    }
    double total2 = 0.0;
    for (double v : out.values) total2 += v * v;
    if (total2 > 0.0) {
        const double inv = 1.0 / std::sqrt(total2);
        for (double& v : out.values) v *= inv;
    }
    return out;
}

void write_pfft(const std::string& path, const std::vector<std::vector<float>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot write feature file '" + path + "'");
    const uint32_t count = static_cast<uint32_t>(rows.size());
    const uint32_t dim = rows.empty() ? 0u : static_cast<uint32_t>(rows.front().size());
    out.write("PFFT", 4);
    out.write(reinterpret_cast<const char*>(&count), 4);
    out.write(reinterpret_cast<const char*>(&dim), 4);
    for (const auto& row : rows) {
        if (row.size() != dim)
            fail("FormatError", "ragged feature rows in '" + path + "'");
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) fail("IoError", "short write to '" + path + "'");
}

std::vector<std::vector<float>> read_pfft(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot open feature file '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "PFFT", 4) != 0)
        fail("FormatError", path + ": missing PFFT magic");
    uint32_t count = 0, dim = 0;
    in.read(reinterpret_cast<char*>(&count), 4);
    in.read(reinterpret_cast<char*>(&dim), 4);
    if (!in) fail("FormatError", path + ": truncated header");
    std::vector<std::vector<float>> rows(count, std::vector<float>(dim));
    for (auto& row : rows) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(dim * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(dim * sizeof(float)))
            fail("FormatError", path + ": truncated feature rows");
    }
    return rows;
}

} // namespace propflow
