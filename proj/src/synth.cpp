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

#include "propflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "propflow/text.hpp"

namespace propflow {

namespace fs = std::filesystem;

Affine2 Affine2::inverse() const {
    const double dt = det();
    if (std::abs(dt) < 1e-12) fail("ConfigError", "global transform is singular");
    const double ia = e / dt, ib = -b / dt, id = -d / dt, ie = a / dt;
    return {ia, ib, -(ia * c + ib * f), id, ie, -(id * c + ie * f)};
}

Box Affine2::apply_box(const Box& box) const {
    const std::pair<double, double> corners[4] = {
        apply(box.x, box.y), apply(box.x + box.w, box.y),
        apply(box.x, box.y + box.h), apply(box.x + box.w, box.y + box.h)};
    double min_x = corners[0].first, max_x = corners[0].first;
    double min_y = corners[0].second, max_y = corners[0].second;
    for (const auto& [cx, cy] : corners) {
        min_x = std::min(min_x, cx);
        max_x = std::max(max_x, cx);
        min_y = std::min(min_y, cy);
        max_y = std::max(max_y, cy);
    }
    return {min_x, min_y, max_x - min_x, max_y - min_y};
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Spread of per-proposal latents around their object's latent; close
// enough that appearance alone confuses proposals of one object at
// noticeable noise levels, which is exactly the regime the geometric
// matchers are meant to fix.
constexpr double kClusterSpread = 0.3;

struct ObjectParams {
    Box box;
    double base, amp1, amp2;
    double period1, period2, period3;
    double phase1, phase2, phase3;
    double angle;
};

// Smooth analytic scene: a low-frequency background with one oriented
// two-grating texture per object, feathered over 2 px at object borders
// so resampling under a warp stays benign.
double scene_value(const std::vector<ObjectParams>& objects, uint32_t width,
                   uint32_t height, double x, double y) {
    double v = 90.0 + 25.0 * std::sin(kTwoPi * x / width * 1.3) *
                          std::cos(kTwoPi * y / height * 1.1);
    for (const auto& o : objects) {
        const double inset_x = std::min(x - o.box.x, o.box.right() - x);
        const double inset_y = std::min(y - o.box.y, o.box.bottom() - y);
        const double inset = std::min(inset_x, inset_y);
        if (inset <= 0.0) continue;
        const double t = std::min(inset / 2.0, 1.0);
        const double lx = x - o.box.x;
        const double ly = y - o.box.y;
        double tex = o.base;
        tex += o.amp1 * std::sin(kTwoPi * lx / o.period1 + o.phase1) *
               std::sin(kTwoPi * ly / o.period2 + o.phase2);
        tex += o.amp2 * std::sin(kTwoPi * (lx * std::cos(o.angle) +
                                           ly * std::sin(o.angle)) / o.period3 +
                                 o.phase3);
        v = (1.0 - t) * v + t * tex;
    }
    return std::clamp(v, 0.0, 255.0);
}

std::vector<double> random_unit_vector(SplitMix64& rng, uint32_t dim) {
    std::vector<double> v(dim);
    double norm2 = 0.0;
    for (auto& c : v) {
        c = rng.next_gaussian();
        norm2 += c * c;
    }
    const double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
    for (auto& c : v) c *= inv;
    return v;
}

std::vector<double> normalized(std::vector<double> v) {
    double norm2 = 0.0;
    for (double c : v) norm2 += c * c;
    if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (auto& c : v) c *= inv;
    }
    return v;
}

// Features travel through the f32 file format; quantize at birth so the
// in-memory fixture and its serialized form agree bit-for-bit.
void quantize_f32(std::vector<double>& v) {
    for (auto& c : v) c = static_cast<double>(static_cast<float>(c));
}

bool inside_image(const Box& b, double width, double height, double margin) {
    return b.x >= margin && b.y >= margin && b.right() <= width - margin &&
           b.bottom() <= height - margin;
}

} // namespace

SynthPair generate(const SynthConfig& cfg) {
    if (cfg.image_width < 16 || cfg.image_height < 16)
        fail("ConfigError", "image size must be at least 16x16");
    if (cfg.feature_dim < 2) fail("ConfigError", "feature_dim must be >= 2");
    const Affine2& A = cfg.global_transform;
    (void)A.inverse(); // validates invertibility up front

    SplitMix64 rng(cfg.seed);
    const double W = cfg.image_width;
    const double H = cfg.image_height;
    const double min_dim = std::min(W, H);

    // Object placement: boxes must fit in image 1, their transforms must
    // fit in image 2, and objects stay pairwise disjoint.
    std::vector<ObjectParams> objects;
    for (uint32_t o = 0; o < cfg.n_objects; ++o) {
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            Box box;
            box.w = rng.next_range(0.18 * min_dim, 0.38 * min_dim);
            box.h = rng.next_range(0.18 * min_dim, 0.38 * min_dim);
            box.x = rng.next_range(2.0, std::max(2.0 + 1e-6, W - 2.0 - box.w));
            box.y = rng.next_range(2.0, std::max(2.0 + 1e-6, H - 2.0 - box.h));
            if (!inside_image(box, W, H, 2.0)) continue;
            if (!inside_image(A.apply_box(box), W, H, 2.0)) continue;
            bool overlaps = false;
            for (const auto& other : objects) {
                Box padded = other.box;
                padded.x -= 4.0;
                padded.y -= 4.0;
                padded.w += 8.0;
                padded.h += 8.0;
                if (intersection_area(box, padded) > 0.0) { overlaps = true; break; }
            }
            if (overlaps) continue;

            ObjectParams p;
            p.box = box;
            p.base = rng.next_range(110.0, 180.0);
            p.amp1 = rng.next_range(25.0, 45.0);
            p.amp2 = rng.next_range(20.0, 40.0);
            // Periods stay well above the pixel pitch so bilinear
            // resampling under a warp keeps sub-level interpolation error.
            p.period1 = rng.next_range(12.0, 24.0);
            p.period2 = rng.next_range(12.0, 24.0);
            p.period3 = rng.next_range(10.0, 18.0);
            p.phase1 = rng.next_range(0.0, kTwoPi);
            p.phase2 = rng.next_range(0.0, kTwoPi);
            p.phase3 = rng.next_range(0.0, kTwoPi);
            p.angle = rng.next_range(0.0, std::numbers::pi);
            objects.push_back(p);
            placed = true;
        }
        if (!placed)
            fail("ConfigError", "cannot pack " + std::to_string(cfg.n_objects) +
                                    " objects into the image under the transform");
    }

    SynthPair pair;
    pair.img1 = RasterImage::make(cfg.image_width, cfg.image_height, 1);
    pair.img2 = RasterImage::make(cfg.image_width, cfg.image_height, 1);
    const Affine2 inv = A.inverse();
    for (uint32_t y = 0; y < cfg.image_height; ++y) {
        for (uint32_t x = 0; x < cfg.image_width; ++x) {
            const double v1 = scene_value(objects, cfg.image_width, cfg.image_height,
                                          x, y);
            const auto [sx, sy] = inv.apply(x, y);
            const double v2 = scene_value(objects, cfg.image_width, cfg.image_height,
                                          sx, sy);
            pair.img1.set(x, y, 0, static_cast<uint8_t>(std::lround(v1)));
            pair.img2.set(x, y, 0, static_cast<uint8_t>(std::lround(v2)));
        }
    }

    const std::string descriptor = "synth-d" + std::to_string(cfg.feature_dim);
    for (ProposalSet* set : {&pair.src, &pair.dst}) {
        set->image_width = cfg.image_width;
        set->image_height = cfg.image_height;
        set->descriptor_id = descriptor;
    }

    auto push_region = [&](ProposalSet& set, const Box& box, std::vector<double> feat) {
        Region r;
        r.id = static_cast<uint32_t>(set.regions.size());
        r.box = box;
        r.feature.descriptor_id = descriptor;
        quantize_f32(feat);
        r.feature.values = std::move(feat);
        set.regions.push_back(std::move(r));
    };

    // Paired proposals: a cloud of sub-boxes per object; destination
    // copies go through the global transform plus the configured jitter,
    // and both sides observe a shared latent corrupted by feature noise.
    for (const auto& obj : objects) {
        std::vector<double> object_latent = random_unit_vector(rng, cfg.feature_dim);
        for (uint32_t k = 0; k < cfg.proposals_per_object; ++k) {
            const double rw = rng.next_range(0.35, 0.85);
            const double rh = rng.next_range(0.35, 0.85);
            const double rx = rng.next_range(0.0, 1.0 - rw);
            const double ry = rng.next_range(0.0, 1.0 - rh);
            const Box src_box{obj.box.x + rx * obj.box.w, obj.box.y + ry * obj.box.h,
                              rw * obj.box.w, rh * obj.box.h};

            // The identity transform must reproduce the source box bit for
            // bit; going through apply_box would re-derive w as (x+w)-x.
            Box dst_box = A.is_identity() ? src_box : A.apply_box(src_box);
            // Jitter draws always happen so the stream stays aligned across
            // configs; the recentering is skipped when it is an exact no-op.
            const double jx = rng.next_gaussian() * cfg.trans_jitter_sigma;
            const double jy = rng.next_gaussian() * cfg.trans_jitter_sigma;
            const double js = std::exp(rng.next_gaussian() * cfg.logscale_jitter_sigma);
            if (jx != 0.0 || jy != 0.0 || js != 1.0) {
                const double cx = dst_box.x + dst_box.w / 2.0 + jx;
                const double cy = dst_box.y + dst_box.h / 2.0 + jy;
                dst_box.w *= js;
                dst_box.h *= js;
                dst_box.x = cx - dst_box.w / 2.0;
                dst_box.y = cy - dst_box.h / 2.0;
            }

            std::vector<double> latent = object_latent;
            const std::vector<double> detail = random_unit_vector(rng, cfg.feature_dim);
            for (uint32_t d = 0; d < cfg.feature_dim; ++d)
                latent[d] += kClusterSpread * detail[d];
            latent = normalized(std::move(latent));

            std::vector<double> f_src = latent;
            std::vector<double> f_dst = latent;
            for (uint32_t d = 0; d < cfg.feature_dim; ++d)
                f_src[d] += cfg.feature_noise_sigma * rng.next_gaussian();
            for (uint32_t d = 0; d < cfg.feature_dim; ++d)
                f_dst[d] += cfg.feature_noise_sigma * rng.next_gaussian();

            pair.true_match.emplace_back(static_cast<uint32_t>(pair.src.regions.size()),
                                         static_cast<uint32_t>(pair.dst.regions.size()));
            push_region(pair.src, src_box, normalized(std::move(f_src)));
            push_region(pair.dst, dst_box, normalized(std::move(f_dst)));
        }
    }

    // Clutter: independent boxes and features on each side.
    auto random_clutter_box = [&]() {
        Box b;
        b.w = rng.next_range(0.08 * min_dim, 0.35 * min_dim);
        b.h = rng.next_range(0.08 * min_dim, 0.35 * min_dim);
        b.x = rng.next_range(0.0, W - b.w);
        b.y = rng.next_range(0.0, H - b.h);
        return b;
    };
    for (uint32_t k = 0; k < cfg.n_clutter; ++k) {
        const Box b = random_clutter_box();
        push_region(pair.src, b, random_unit_vector(rng, cfg.feature_dim));
    }
    for (uint32_t k = 0; k < cfg.n_clutter; ++k) {
        const Box b = random_clutter_box();
        push_region(pair.dst, b, random_unit_vector(rng, cfg.feature_dim));
    }

    // Keypoints: a 3x3 grid per object, mapped exactly by the transform.
    for (const auto& obj : objects) {
        for (double fy : {0.15, 0.5, 0.85}) {
            for (double fx : {0.15, 0.5, 0.85}) {
                const double sx = obj.box.x + fx * obj.box.w;
                const double sy = obj.box.y + fy * obj.box.h;
                const auto [dx, dy] = A.apply(sx, sy);
                pair.keypoints.push_back({sx, sy, dx, dy});
            }
        }
    }

    if (objects.empty()) {
        pair.bbox1 = Box{0.0, 0.0, W, H};
        pair.bbox2 = Box{0.0, 0.0, W, H};
    } else {
        double min_x = objects[0].box.x, min_y = objects[0].box.y;
        double max_x = objects[0].box.right(), max_y = objects[0].box.bottom();
        for (const auto& o : objects) {
            min_x = std::min(min_x, o.box.x);
            min_y = std::min(min_y, o.box.y);
            max_x = std::max(max_x, o.box.right());
            max_y = std::max(max_y, o.box.bottom());
        }
        pair.bbox1 = Box{min_x, min_y, max_x - min_x, max_y - min_y};
        pair.bbox2 = A.apply_box(pair.bbox1);
    }
    return pair;
}

std::vector<Box> sliding_window_boxes(uint32_t image_width, uint32_t image_height,
                                      std::span<const double> scales,
                                      std::span<const double> aspects,
                                      double stride_frac) {
    if (scales.empty() || aspects.empty())
        fail("ConfigError", "sliding windows need at least one scale and aspect");
    if (stride_frac <= 0.0 || stride_frac > 1.0)
        fail("ConfigError", "stride_frac must be in (0, 1]");
    const double W = image_width;
    const double H = image_height;

    std::vector<Box> boxes;
    std::set<std::array<double, 4>> seen;
    for (double scale : scales) {
        for (double aspect : aspects) {
            const double w = std::min(scale * std::sqrt(aspect), W);
            const double h = std::min(scale / std::sqrt(aspect), H);
            const double stride_x = stride_frac * w;
            const double stride_y = stride_frac * h;
            const auto nx = static_cast<std::size_t>(std::floor((W - w) / stride_x)) + 1;
            const auto ny = static_cast<std::size_t>(std::floor((H - h) / stride_y)) + 1;
            for (std::size_t iy = 0; iy < ny; ++iy) {
                for (std::size_t ix = 0; ix < nx; ++ix) {
                    const Box b{ix * stride_x, iy * stride_y, w, h};
                    if (seen.insert({b.x, b.y, b.w, b.h}).second) boxes.push_back(b);
                }
            }
        }
    }
    return boxes;
}

std::vector<double> default_sw_scales(uint32_t image_width, uint32_t image_height) {
    const double base = 0.1 * std::min(image_width, image_height);
    const double top = 0.9 * std::min(image_width, image_height);
    std::vector<double> scales(5);
    for (int i = 0; i < 5; ++i)
        scales[static_cast<std::size_t>(i)] = base * std::pow(top / base, i / 4.0);
    return scales;
}

std::vector<double> default_sw_aspects() {
    return {0.5, 1.0 / std::sqrt(2.0), 1.0, std::sqrt(2.0), 2.0};
}

uint32_t score_against_truth(const MatchSet& matches, const SynthPair& truth,
                             double iou_thresh) {
    uint32_t correct = 0;
    for (const auto& [src_id, dst_id] : truth.true_match) {
        if (src_id >= matches.entries.size() ||
            matches.entries[src_id].src_id != src_id)
            fail("FormatError", "match set does not cover source id " +
                                    std::to_string(src_id));
        const Box& assigned = truth.dst.regions[matches.entries[src_id].dst_id].box;
        const Box& expected = truth.dst.regions[dst_id].box;
        if (iou(assigned, expected) >= iou_thresh) ++correct;
    }
    return correct;
}

void save_synth(const std::string& dir, const SynthPair& pair) {
    fs::create_directories(dir);
    const fs::path root(dir);
    write_pnm(pair.img1, (root / "img1.pgm").string());
    write_pnm(pair.img2, (root / "img2.pgm").string());

    ProposalSet src = pair.src;
    ProposalSet dst = pair.dst;
    src.image_path = "img1.pgm";
    dst.image_path = "img2.pgm";
    save_proposals((root / "src.json").string(), src, /*inline_features=*/false);
    save_proposals((root / "dst.json").string(), dst, /*inline_features=*/false);

    KeypointFile kf;
    kf.src_image = "img1.pgm";
    kf.dst_image = "img2.pgm";
    kf.pairs = pair.keypoints;
    kf.src_bbox = pair.bbox1;
    kf.dst_bbox = pair.bbox2;
    save_keypoints((root / "keypoints.json").string(), kf);

    std::ofstream truth((root / "truth.csv").string());
    if (!truth) fail("IoError", "cannot write truth.csv under '" + dir + "'");
    truth << "src_id,dst_id\n";
    for (const auto& [s, d] : pair.true_match) truth << s << "," << d << "\n";
}

} // namespace propflow
