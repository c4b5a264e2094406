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

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "propflow/geometry.hpp"
#include "propflow/proposals.hpp"

namespace propflow {

// One annotated keypoint correspondence between two images.
struct KeypointPair {
    double src_x = 0.0;
    double src_y = 0.0;
    double dst_x = 0.0;
    double dst_y = 0.0;
};

// Interpolating thin-plate spline with kernel U(r) = r^2 ln(r^2),
// U(0) = 0. Side conditions sum(w) = sum(w*x) = sum(w*y) = 0 hold per
// output coordinate, and with zero regularization the warp reproduces
// every control pair exactly.
struct TpsWarp {
    std::vector<std::array<double, 2>> control_points;
    std::array<double, 3> affine_x{}; // a0 + ax*x + ay*y
    std::array<double, 3> affine_y{};
    std::vector<double> weights_x;
    std::vector<double> weights_y;

    std::array<double, 2> apply(double x, double y) const;
};

// Fits the interpolating TPS (lambda = 0) or a smoothing variant
// (lambda > 0 added to the kernel diagonal). Duplicate source points
// within 1e-6 px or a singular system raise DegenerateControlPoints.
TpsWarp tps_fit(std::span<const KeypointPair> pairs, double lambda = 0.0);

inline std::array<double, 2> tps_apply(const TpsWarp& warp, double x, double y) {
    return warp.apply(x, y);
}

// Ground-truth correspondence of one source region in the second image.
struct GtCorrespondence {
    uint32_t src_region_id = 0;
    Box gt_box;
};

// Regions whose own area lies at least 75% inside bbox (inclusive).
std::vector<uint32_t> select_rs(const ProposalSet& set, const Box& bbox);

// Warps the box's four vertices and bounds them with a tight axis-aligned
// rectangle; DegenerateGt if the warped quad collapses to zero extent.
Box gt_region(const TpsWarp& warp, const Box& region);

std::vector<GtCorrespondence> generate_gt(const TpsWarp& warp, const ProposalSet& set,
                                          std::span<const uint32_t> region_ids);

// Keypoint file: JSON {src_image, dst_image, pairs: [[x1,y1,x2,y2],...],
// src_bbox: [x,y,w,h], dst_bbox: [x,y,w,h]}.
struct KeypointFile {
    std::string src_image;
    std::string dst_image;
    std::vector<KeypointPair> pairs;
    Box src_bbox;
    Box dst_bbox;
};

KeypointFile load_keypoints(const std::string& path);
void save_keypoints(const std::string& path, const KeypointFile& kf);

// GT CSV: header "src_region_id,gt_x,gt_y,gt_w,gt_h".
void write_gt_csv(const std::string& path, std::span<const GtCorrespondence> gts);
std::vector<GtCorrespondence> read_gt_csv(const std::string& path);

} // namespace propflow
