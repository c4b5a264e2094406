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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "propflow/geometry.hpp"
#include "propflow/matching.hpp"
#include "propflow/proposals.hpp"
#include "propflow/rng.hpp"
#include "propflow/tps.hpp"

namespace propflow {

// Row-major 2x3 affine map: x' = a*x + b*y + c, y' = d*x + e*y + f.
struct Affine2 {
    double a = 1.0, b = 0.0, c = 0.0;
    double d = 0.0, e = 1.0, f = 0.0;

    static Affine2 identity() { return {}; }
    static Affine2 translation(double tx, double ty) { return {1, 0, tx, 0, 1, ty}; }
    // Scale about the origin composed with a translation.
    static Affine2 scale_translate(double s, double tx, double ty) {
        return {s, 0, tx, 0, s, ty};
    }

    bool is_identity() const {
        return a == 1.0 && b == 0.0 && c == 0.0 && d == 0.0 && e == 1.0 && f == 0.0;
    }

    std::pair<double, double> apply(double x, double y) const {
        return {a * x + b * y + c, d * x + e * y + f};
    }
    double det() const { return a * e - b * d; }
    Affine2 inverse() const;
    // Axis-aligned bounds of the four transformed corners.
    Box apply_box(const Box& box) const;
};

struct SynthConfig {
    uint64_t seed = 1;
    uint32_t image_width = 320;
    uint32_t image_height = 240;
    uint32_t n_objects = 2;
    uint32_t proposals_per_object = 20;
    uint32_t n_clutter = 0;
    uint32_t feature_dim = 16;
    double feature_noise_sigma = 0.0;
    double trans_jitter_sigma = 0.0;    // px, on destination box centers
    double logscale_jitter_sigma = 0.0; // on destination box log-scales
    Affine2 global_transform = Affine2::identity();
};

// A generated scene pair with known correspondence: textured rectangular
// objects, per-object proposal clouds related by the global transform
// plus jitter, clutter proposals with independent boxes and features,
// keypoints mapped exactly by the transform, and per-image object
// bounding boxes.
struct SynthPair {
    RasterImage img1;
    RasterImage img2;
    ProposalSet src;
    ProposalSet dst;
    std::vector<std::pair<uint32_t, uint32_t>> true_match; // non-clutter src -> dst
    std::vector<KeypointPair> keypoints;
    Box bbox1;
    Box bbox2;
};

SynthPair generate(const SynthConfig& cfg);

// Regular sliding-window grid over the given scales (box side in px) and
// aspect ratios (w/h); per-axis stride is stride_frac times the box
// extent on that axis. Boxes are clipped to the image and deduplicated.
std::vector<Box> sliding_window_boxes(uint32_t image_width, uint32_t image_height,
                                      std::span<const double> scales,
                                      std::span<const double> aspects,
                                      double stride_frac);

// Defaults: 5 scales logarithmic from 0.1 to 0.9 of min(W, H), aspects
// {1/2, 1/sqrt(2), 1, sqrt(2), 2}, stride_frac 0.5.
std::vector<double> default_sw_scales(uint32_t image_width, uint32_t image_height);
std::vector<double> default_sw_aspects();

// Number of non-clutter sources whose assigned destination box overlaps
// the true destination box with IoU >= iou_thresh.
uint32_t score_against_truth(const MatchSet& matches, const SynthPair& truth,
                             double iou_thresh);

// Writes the pair in the standard ingest formats: img1/img2.pgm,
// src/dst.json (+ .pfft sidecars), keypoints.json, truth.csv.
void save_synth(const std::string& dir, const SynthPair& pair);

} // namespace propflow
