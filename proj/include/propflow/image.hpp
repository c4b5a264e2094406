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

#include <cstdint>
#include <string>
#include <vector>

#include "propflow/errors.hpp"

namespace propflow {

// 8-bit raster, 1 (gray) or 3 (RGB) interleaved channels, row-major.
struct RasterImage {
    uint32_t width = 0;
    uint32_t height = 0;
    uint32_t channels = 1;
    std::vector<uint8_t> pixels;

    static RasterImage make(uint32_t w, uint32_t h, uint32_t c, uint8_t fill = 0);

    uint8_t at(uint32_t x, uint32_t y, uint32_t c = 0) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    void set(uint32_t x, uint32_t y, uint32_t c, uint8_t v) {
        pixels[(static_cast<std::size_t>(y) * width + x) * channels + c] = v;
    }
};

// Binary PGM (P5) / PPM (P6), 8-bit only.
RasterImage read_pnm(const std::string& path);
void write_pnm(const RasterImage& img, const std::string& path);

// Rec.601 luma for RGB, identity for gray; values in [0, 255].
std::vector<double> to_luminance(const RasterImage& img);

// Bilinear sample of a luminance plane with edge clamping. Integer
// coordinates address pixel centers.
double bilinear_sample(const std::vector<double>& plane, uint32_t width,
                       uint32_t height, double x, double y);

// Same convention, sampling one channel of an 8-bit raster.
double bilinear_sample_u8(const RasterImage& img, uint32_t channel, double x, double y);

} // namespace propflow
