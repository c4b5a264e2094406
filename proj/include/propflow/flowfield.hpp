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

#include "propflow/image.hpp"
#include "propflow/matching.hpp"
#include "propflow/proposals.hpp"

namespace propflow {

// Dense displacement field on the first image's pixel grid; (u, v) point
// into the second image.
struct FlowField {
    uint32_t width = 0;
    uint32_t height = 0;
    std::vector<double> u;
    std::vector<double> v;
    std::vector<double> score;
    std::vector<uint8_t> valid;

    static FlowField make(uint32_t w, uint32_t h);
    std::size_t index(uint32_t x, uint32_t y) const {
        return static_cast<std::size_t>(y) * width + x;
    }
    // Casts u and v through f32 so the in-memory field matches the .flo
    // encoding bit-for-bit.
    void quantize_f32();
};

// Per-pixel id of the covering region whose match score is highest
// (ties toward the lowest id), or -1 where no region covers the pixel.
struct AnchorIndex {
    uint32_t width = 0;
    uint32_t height = 0;
    std::vector<int32_t> region_id;
};

AnchorIndex build_anchor_index(const ProposalSet& source, const MatchSet& matches);

// Transfers each anchored pixel through its anchor's box-to-box affine
// map, then resolves many-to-one collisions on the rounded target pixel
// by score (ties toward the lower source pixel index); losers and
// unanchored pixels are left invalid.
FlowField synthesize_flow(const ProposalSet& source, const ProposalSet& dest,
                          const MatchSet& matches, const AnchorIndex& anchors);

struct FillParams {
    double sigma_spatial = 4.0; // px
    double sigma_guide = 10.0;  // intensity levels
};

// Repaints invalid pixels with a normalized average of the originally
// valid flow inside a window that starts 9x9 and doubles its radius until
// it captures a valid pixel. Weights are Gaussian in distance and, when a
// guide image is given, in guide-intensity difference.
FlowField fill_holes(const FlowField& flow, const RasterImage* guide,
                     const FillParams& params = {});

// out(p) = bilinear sample of `second` at p + (u, v), edge-clamped.
RasterImage warp_image(const RasterImage& second, const FlowField& flow);

// Middlebury-style binary flow file: "PIEH", i32 LE width, i32 LE height,
// then row-major interleaved f32 LE (u, v).
void write_flo(const std::string& path, const FlowField& flow);
FlowField read_flo(const std::string& path);

} // namespace propflow
