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

#include "propflow/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "propflow/rng.hpp"
#include "propflow/text.hpp"

namespace propflow {

std::vector<double> default_tau_grid() {
    std::vector<double> taus(101);
    for (int i = 0; i < 101; ++i) taus[static_cast<std::size_t>(i)] = (i + 1) / 101.0;
    return taus;
}

namespace {

// IoU between each ground-truthed region's assigned destination box and
// its ground-truth box, keyed by the gts order.
std::vector<double> match_ious(const MatchSet& matches, const ProposalSet& dest,
                               std::span<const GtCorrespondence> gts) {
    std::vector<double> ious;
    ious.reserve(gts.size());
    for (const auto& g : gts) {
        const MatchEntry* entry = nullptr;
        for (const auto& e : matches.entries)
            if (e.src_id == g.src_region_id) { entry = &e; break; }
        if (!entry)
            fail("MissingGt", "no match entry for ground-truthed region " +
                                  std::to_string(g.src_region_id));
        if (entry->dst_id >= dest.size())
            fail("FormatError", "match dst_id " + std::to_string(entry->dst_id) +
                                    " outside the destination set");
        ious.push_back(iou(dest.regions[entry->dst_id].box, g.gt_box));
    }
    return ious;
}

} // namespace

Curve pcr(const MatchSet& matches, const ProposalSet& dest,
          std::span<const GtCorrespondence> gts, std::span<const double> taus) {
    if (gts.empty()) fail("MissingGt", "PCR needs at least one ground-truth region");
    const std::vector<double> ious = match_ious(matches, dest, gts);
    Curve curve;
    curve.x.assign(taus.begin(), taus.end());
    curve.y.reserve(taus.size());
    for (double tau : taus) {
        std::size_t correct = 0;
        for (double v : ious)
            if (1.0 - v < tau) ++correct;
        curve.y.push_back(static_cast<double>(correct) / static_cast<double>(ious.size()));
    }
    return curve;
}

Curve miou_at_k(const MatchSet& matches, const ProposalSet& dest,
                std::span<const GtCorrespondence> gts) {
    if (gts.empty()) fail("MissingGt", "mIoU@k needs at least one ground-truth region");
    const std::vector<double> ious = match_ious(matches, dest, gts);

    std::vector<double> scores(gts.size());
    for (std::size_t i = 0; i < gts.size(); ++i) {
        for (const auto& e : matches.entries)
            if (e.src_id == gts[i].src_region_id) { scores[i] = e.score; break; }
    }
    // Rank by score descending; ties by src_id ascending.
    std::vector<std::size_t> order(gts.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return gts[a].src_region_id < gts[b].src_region_id;
    });

    Curve curve;
    curve.x.reserve(gts.size());
    curve.y.reserve(gts.size());
    double running = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        running += ious[order[k]];
        curve.x.push_back(static_cast<double>(k + 1));
        curve.y.push_back(running / static_cast<double>(k + 1));
    }
    return curve;
}

double auc(const Curve& curve) {
    if (curve.x.empty() || curve.x.size() != curve.y.size())
        fail("FormatError", "empty or ragged curve");
    if (curve.x.size() == 1) return curve.y.front();
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < curve.x.size(); ++i)
        area += (curve.x[i + 1] - curve.x[i]) * (curve.y[i] + curve.y[i + 1]) / 2.0;
    const double span = curve.x.back() - curve.x.front();
    if (span <= 0.0) fail("FormatError", "curve domain has non-positive length");
    return area / span;
}

PckResult pck_flow(const FlowField& flow, std::span<const KeypointPair> pairs,
                   const Box& dst_bbox, double alpha) {
    PckResult result;
    result.alpha = alpha;
    const double threshold = alpha * std::max(dst_bbox.h, dst_bbox.w);
    for (const auto& p : pairs) {
        if (p.src_x < 0.0 || p.src_x >= flow.width || p.src_y < 0.0 ||
            p.src_y >= flow.height)
            fail("KeypointOutsideImage",
                 "keypoint (" + format_double(p.src_x) + ", " + format_double(p.src_y) +
                     ") outside the flow grid");
        const double u = bilinear_sample(flow.u, flow.width, flow.height, p.src_x, p.src_y);
        const double v = bilinear_sample(flow.v, flow.width, flow.height, p.src_x, p.src_y);
        const double ex = p.src_x + u - p.dst_x;
        const double ey = p.src_y + v - p.dst_y;
        if (std::sqrt(ex * ex + ey * ey) < threshold) ++result.correct;
        ++result.total;
    }
    return result;
}

double leave_n_out(std::span<const KeypointPair> pairs, uint32_t n, uint32_t trials,
                   double alpha, uint64_t seed, const std::optional<Box>& dst_bbox) {
    const std::size_t m = pairs.size();
    if (n >= m || m - n < 3)
        fail("TooFewKeypoints", "need n < |pairs| and at least 3 retained pairs");
    if (trials == 0) fail("ConfigError", "trials must be >= 1");

    Box bbox;
    if (dst_bbox) {
        bbox = *dst_bbox;
    } else {
        double min_x = pairs[0].dst_x, max_x = pairs[0].dst_x;
        double min_y = pairs[0].dst_y, max_y = pairs[0].dst_y;
        for (const auto& p : pairs) {
            min_x = std::min(min_x, p.dst_x);
            max_x = std::max(max_x, p.dst_x);
            min_y = std::min(min_y, p.dst_y);
            max_y = std::max(max_y, p.dst_y);
        }
        bbox = Box{min_x, min_y, max_x - min_x, max_y - min_y};
    }
    const double threshold = alpha * std::max(bbox.h, bbox.w);

    SplitMix64 rng(seed);
    double pck_sum = 0.0;
    std::vector<std::size_t> indices(m);
    for (uint32_t t = 0; t < trials; ++t) {
        // Partial Fisher-Yates: the first n entries become the held-out set.
        std::iota(indices.begin(), indices.end(), 0);
        for (uint32_t k = 0; k < n; ++k) {
            const auto pick =
                k + static_cast<std::size_t>(rng.next_below(static_cast<uint64_t>(m - k)));
            std::swap(indices[k], indices[pick]);
        }
        std::vector<KeypointPair> held_pairs;
        held_pairs.reserve(n);
        std::vector<KeypointPair> retained;
        retained.reserve(m - n);
        for (uint32_t k = 0; k < n; ++k) held_pairs.push_back(pairs[indices[k]]);
        for (std::size_t k = n; k < m; ++k) retained.push_back(pairs[indices[k]]);

        const TpsWarp warp = tps_fit(retained);
        uint32_t correct = 0;
        for (const auto& p : held_pairs) {
            const auto pred = warp.apply(p.src_x, p.src_y);
            const double ex = pred[0] - p.dst_x;
            const double ey = pred[1] - p.dst_y;
            if (std::sqrt(ex * ex + ey * ey) < threshold) ++correct;
        }
        pck_sum += static_cast<double>(correct) / static_cast<double>(n);
    }
    return pck_sum / trials;
}

void write_curve_csv(const std::string& path, const Curve& curve,
                     const std::string& x_name) {
    std::ofstream out(path);
    if (!out) fail("IoError", "cannot write '" + path + "'");
    out << x_name << ",value\n";
    for (std::size_t i = 0; i < curve.x.size(); ++i)
        out << format_double(curve.x[i]) << "," << format_double(curve.y[i]) << "\n";
    if (!out) fail("IoError", "short write to '" + path + "'");
}

Curve read_curve_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line.find(",value") == std::string::npos)
        fail("FormatError", path + ": expected '<x>,value' header");
    Curve curve;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        const std::string ctx = path + ":" + std::to_string(lineno);
        if (fields.size() != 2) fail("FormatError", ctx + ": expected 2 fields");
        curve.x.push_back(parse_double(fields[0], ctx));
        curve.y.push_back(parse_double(fields[1], ctx));
    }
    return curve;
}

void write_curve_svg(const std::string& path, const Curve& curve,
                     const std::string& title) {
    if (curve.x.empty()) fail("FormatError", "cannot plot an empty curve");
    constexpr int width = 480, height = 320, margin = 40;
    const double x_min = curve.x.front();
    const double x_max = curve.x.back();
    const double x_span = x_max > x_min ? x_max - x_min : 1.0;

    std::ofstream out(path);
    if (!out) fail("IoError", "cannot write '" + path + "'");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height
        << "\">\n";
    out << "  <rect width=\"" << width << "\" height=\"" << height
        << "\" fill=\"white\"/>\n";
    out << "  <text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"13\">" << title << "</text>\n";
    // Axes: y fixed to [0, 1], x to the curve's domain.
    out << "  <line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
        << width - margin << "\" y2=\"" << height - margin
        << "\" stroke=\"black\"/>\n";
    out << "  <line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
        << margin << "\" y2=\"" << margin << "\" stroke=\"black\"/>\n";
    out << "  <polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < curve.x.size(); ++i) {
        const double px =
            margin + (curve.x[i] - x_min) / x_span * (width - 2 * margin);
        const double py = height - margin -
                          std::clamp(curve.y[i], 0.0, 1.0) * (height - 2 * margin);
        out << format_double(px) << "," << format_double(py);
        if (i + 1 < curve.x.size()) out << " ";
    }
    out << "\"/>\n</svg>\n";
    if (!out) fail("IoError", "short write to '" + path + "'");
}

} // namespace propflow
