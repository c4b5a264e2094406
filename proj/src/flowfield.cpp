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

#include "propflow/flowfield.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "propflow/parallel.hpp"

namespace propflow {

FlowField FlowField::make(uint32_t w, uint32_t h) {
    FlowField f;
    f.width = w;
    f.height = h;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    f.u.assign(n, 0.0);
    f.v.assign(n, 0.0);
    f.score.assign(n, 0.0);
    f.valid.assign(n, 0);
    return f;
}

void FlowField::quantize_f32() {
    for (auto& x : u) x = static_cast<float>(x);
    for (auto& x : v) x = static_cast<float>(x);
}

AnchorIndex build_anchor_index(const ProposalSet& source, const MatchSet& matches) {
    if (matches.entries.size() != source.size())
        fail("FormatError", "match set does not cover the proposal set");
    for (std::size_t i = 0; i < matches.entries.size(); ++i)
        if (matches.entries[i].src_id != i)
            fail("FormatError",
                 "match entries must list src_id 0..n-1 in order (row " +
                     std::to_string(i) + " has src_id " +
                     std::to_string(matches.entries[i].src_id) + ")");
    AnchorIndex idx;
    idx.width = source.image_width;
    idx.height = source.image_height;
    idx.region_id.assign(static_cast<std::size_t>(idx.width) * idx.height, -1);

    // Half-open pixel-in-box rule: x <= px < x + w.
    parallel_for(idx.height, [&](std::size_t y) {
        for (uint32_t x = 0; x < idx.width; ++x) {
            const double px = static_cast<double>(x);
            const double py = static_cast<double>(y);
            int32_t best = -1;
            double best_score = 0.0;
            for (const auto& r : source.regions) {
                if (px < r.box.x || px >= r.box.right() || py < r.box.y ||
                    py >= r.box.bottom())
                    continue;
                const double s = matches.entries[r.id].score;
                if (best < 0 || s > best_score) {
                    best = static_cast<int32_t>(r.id);
                    best_score = s;
                }
            }
            idx.region_id[static_cast<std::size_t>(y) * idx.width + x] = best;
        }
    });
    return idx;
}

FlowField synthesize_flow(const ProposalSet& source, const ProposalSet& dest,
                          const MatchSet& matches, const AnchorIndex& anchors) {
    FlowField flow = FlowField::make(anchors.width, anchors.height);

    parallel_for(flow.height, [&](std::size_t y) {
        for (uint32_t x = 0; x < flow.width; ++x) {
            const std::size_t at = flow.index(x, static_cast<uint32_t>(y));
            const int32_t rid = anchors.region_id[at];
            if (rid < 0) continue;
            const Box& s = source.regions[static_cast<std::size_t>(rid)].box;
            const MatchEntry& e = matches.entries[static_cast<std::size_t>(rid)];
            const Box& t = dest.regions[e.dst_id].box;
            const double tx = t.x + (x - s.x) * t.w / s.w;
            const double ty = t.y + (y - s.y) * t.h / s.h;
            flow.u[at] = tx - x;
            flow.v[at] = ty - y;
            flow.score[at] = e.score;
            flow.valid[at] = 1;
        }
    });

    // Many-to-one collisions on the rounded target pixel keep the highest
    // score; equal scores keep the lower source index, independent of
    // processing order.
    std::unordered_map<uint64_t, std::size_t> winner;
    winner.reserve(flow.u.size() / 4);
    const std::size_t total = flow.u.size();
    for (std::size_t i = 0; i < total; ++i) {
        if (!flow.valid[i]) continue;
        const uint32_t x = static_cast<uint32_t>(i % flow.width);
        const uint32_t y = static_cast<uint32_t>(i / flow.width);
        const auto tx = static_cast<int64_t>(std::llround(x + flow.u[i]));
        const auto ty = static_cast<int64_t>(std::llround(y + flow.v[i]));
        const uint64_t key = (static_cast<uint64_t>(static_cast<uint32_t>(tx)) << 32) |
                             static_cast<uint64_t>(static_cast<uint32_t>(ty));
        auto [it, inserted] = winner.try_emplace(key, i);
        if (inserted) continue;
        const std::size_t prev = it->second;
        if (flow.score[i] > flow.score[prev] ||
            (flow.score[i] == flow.score[prev] && i < prev)) {
            flow.valid[prev] = 0;
            it->second = i;
        } else {
            flow.valid[i] = 0;
        }
    }
    return flow;
}

FlowField fill_holes(const FlowField& flow, const RasterImage* guide,
                     const FillParams& params) {
    const std::size_t total = flow.u.size();
    bool any_valid = false;
    for (std::size_t i = 0; i < total; ++i)
        if (flow.valid[i]) { any_valid = true; break; }
    if (!any_valid) fail("NoValidFlow", "cannot fill a field with zero valid pixels");

    std::vector<double> lum;
    if (guide) {
        if (guide->width != flow.width || guide->height != flow.height)
            fail("FormatError", "guide image dimensions do not match the flow field");
        lum = to_luminance(*guide);
    }

    FlowField out = flow;
    const double inv_2s2 = 1.0 / (2.0 * params.sigma_spatial * params.sigma_spatial);
    const double inv_2g2 = 1.0 / (2.0 * params.sigma_guide * params.sigma_guide);
    const long w = flow.width;
    const long h = flow.height;

    parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
        const long y = static_cast<long>(row);
        for (long x = 0; x < w; ++x) {
            const std::size_t at = flow.index(static_cast<uint32_t>(x),
                                              static_cast<uint32_t>(y));
            if (flow.valid[at]) continue;

            // Window starts 9x9 and doubles its radius until it captures a
            // valid donor.
            long radius = 4;
            long x0, x1, y0, y1;
            std::size_t ref = 0;
            double ref_d2 = 0.0;
            while (true) {
                x0 = std::max(0L, x - radius);
                x1 = std::min(w - 1, x + radius);
                y0 = std::max(0L, y - radius);
                y1 = std::min(h - 1, y + radius);
                bool found = false;
                for (long qy = y0; qy <= y1; ++qy) {
                    for (long qx = x0; qx <= x1; ++qx) {
                        const std::size_t q = flow.index(static_cast<uint32_t>(qx),
                                                         static_cast<uint32_t>(qy));
                        if (!flow.valid[q]) continue;
                        const double d2 = static_cast<double>((qx - x) * (qx - x) +
                                                              (qy - y) * (qy - y));
                        if (!found || d2 < ref_d2) {
                            found = true;
                            ref_d2 = d2;
                            ref = q;
                        }
                    }
                }
                if (found) break;
                radius *= 2;
            }

            // Weights are shifted by the nearest donor's distance; the shift
            // cancels in the normalized average and keeps exp() from
            // underflowing for far-away donors. Accumulating deltas against
            // the reference donor keeps a constant field exactly constant.
            double sum_w = 0.0, sum_du = 0.0, sum_dv = 0.0, sum_ds = 0.0;
            for (long qy = y0; qy <= y1; ++qy) {
                for (long qx = x0; qx <= x1; ++qx) {
                    const std::size_t q = flow.index(static_cast<uint32_t>(qx),
                                                     static_cast<uint32_t>(qy));
                    if (!flow.valid[q]) continue;
                    const double d2 = static_cast<double>((qx - x) * (qx - x) +
                                                          (qy - y) * (qy - y));
                    double wgt = std::exp(-(d2 - ref_d2) * inv_2s2);
                    if (guide) {
                        const double dg = lum[at] - lum[q];
                        wgt *= std::exp(-dg * dg * inv_2g2);
                    }
                    sum_w += wgt;
                    sum_du += wgt * (flow.u[q] - flow.u[ref]);
                    sum_dv += wgt * (flow.v[q] - flow.v[ref]);
                    sum_ds += wgt * (flow.score[q] - flow.score[ref]);
                }
            }
            out.u[at] = flow.u[ref] + sum_du / sum_w;
            out.v[at] = flow.v[ref] + sum_dv / sum_w;
            out.score[at] = flow.score[ref] + sum_ds / sum_w;
            out.valid[at] = 1;
        }
    });
    return out;
}

RasterImage warp_image(const RasterImage& second, const FlowField& flow) {
    RasterImage out = RasterImage::make(flow.width, flow.height, second.channels);
    parallel_for(flow.height, [&](std::size_t y) {
        for (uint32_t x = 0; x < flow.width; ++x) {
            const std::size_t at = flow.index(x, static_cast<uint32_t>(y));
            const double sx = x + flow.u[at];
            const double sy = y + flow.v[at];
            for (uint32_t c = 0; c < second.channels; ++c) {
                const double v = bilinear_sample_u8(second, c, sx, sy);
                out.set(x, static_cast<uint32_t>(y), c,
                        static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L)));
            }
        }
    });
    return out;
}

void write_flo(const std::string& path, const FlowField& flow) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot write '" + path + "'");
    out.write("PIEH", 4);
    const int32_t w = static_cast<int32_t>(flow.width);
    const int32_t h = static_cast<int32_t>(flow.height);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    for (std::size_t i = 0; i < flow.u.size(); ++i) {
        const float uv[2] = {static_cast<float>(flow.u[i]), static_cast<float>(flow.v[i])};
        out.write(reinterpret_cast<const char*>(uv), sizeof(uv));
    }
    if (!out) fail("IoError", "short write to '" + path + "'");
}

FlowField read_flo(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "PIEH", 4) != 0)
        fail("FormatError", path + ": missing PIEH magic");
    int32_t w = 0, h = 0;
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    if (!in || w <= 0 || h <= 0) fail("FormatError", path + ": bad dimensions");
    FlowField flow = FlowField::make(static_cast<uint32_t>(w), static_cast<uint32_t>(h));
    for (std::size_t i = 0; i < flow.u.size(); ++i) {
        float uv[2];
        in.read(reinterpret_cast<char*>(uv), sizeof(uv));
        if (in.gcount() != sizeof(uv)) fail("FormatError", path + ": truncated flow data");
        flow.u[i] = uv[0];
        flow.v[i] = uv[1];
        flow.valid[i] = 1;
    }
    return flow;
}

} // namespace propflow
