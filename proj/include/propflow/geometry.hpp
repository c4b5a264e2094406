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

#include <algorithm>
#include <cmath>

#include "propflow/errors.hpp"

namespace propflow {

// Axis-aligned rectangle in continuous pixel coordinates. Boxes with
// non-positive extents are rejected at file-ingest time; every function
// below assumes w > 0 and h > 0.
struct Box {
    double x = 0.0; // left
    double y = 0.0; // top
    double w = 0.0;
    double h = 0.0;

    double area() const { return w * h; }
    double right() const { return x + w; }
    double bottom() const { return y + h; }
};

inline bool box_valid(const Box& b) {
    return std::isfinite(b.x) && std::isfinite(b.y) && b.w > 0.0 && b.h > 0.0 &&
           std::isfinite(b.w) && std::isfinite(b.h);
}

inline double intersection_area(const Box& a, const Box& b) {
    const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    return (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
}

// Intersection over union of two boxes; 1 iff identical, 0 iff the
// interiors are disjoint. The identical case is handled up front so it
// holds exactly even when x + w rounds.
inline double iou(const Box& a, const Box& b) {
    if (a.x == b.x && a.y == b.y && a.w == b.w && a.h == b.h) return 1.0;
    const double inter = intersection_area(a, b);
    if (inter <= 0.0) return 0.0;
    return inter / (a.area() + b.area() - inter);
}

// Position-plus-scale location of a box. The scale component is
// ln(sqrt(w*h)) so that uniformly rescaling an image shifts every
// log-scale by the same constant and scale ratios become additive.
struct LocationVec {
    double cx = 0.0; // box center x, px
    double cy = 0.0; // box center y, px
    double ls = 0.0; // log-scale
};

// Translation-plus-log-scale difference between two box locations.
struct OffsetVector {
    double dx = 0.0;
    double dy = 0.0;
    double dls = 0.0;
};

inline LocationVec location(const Box& s) {
    return {s.x + s.w / 2.0, s.y + s.h / 2.0, std::log(std::sqrt(s.w * s.h))};
}

// location(s) - location(s_prime), componentwise.
inline OffsetVector offset(const Box& s, const Box& s_prime) {
    const LocationVec a = location(s);
    const LocationVec b = location(s_prime);
    return {a.cx - b.cx, a.cy - b.cy, a.ls - b.ls};
}

// Bandwidths of the Gaussian kernel over offset space.
struct KernelParams {
    double sigma_xy = 16.0;               // px, shared by dx and dy
    double sigma_ls = 0.34657359027997264; // ln(2)/2
};

// Default bandwidths: sigma_xy is 5% of the larger source-image dimension,
// sigma_ls is ln(2)/2 (one octave at two sigma).
inline KernelParams default_kernel_params(double image_width, double image_height) {
    return {0.05 * std::max(image_width, image_height), std::log(2.0) / 2.0};
}

// Unnormalized Gaussian in the 3-D offset space; equals 1 exactly at
// x == mu and decays with the scaled deviation on each axis.
inline double offset_kernel(const OffsetVector& x, const OffsetVector& mu,
                            const KernelParams& k) {
    const double ex = (x.dx - mu.dx) / k.sigma_xy;
    const double ey = (x.dy - mu.dy) / k.sigma_xy;
    const double es = (x.dls - mu.dls) / k.sigma_ls;
    return std::exp(-0.5 * (ex * ex + ey * ey + es * es));
}

} // namespace propflow
