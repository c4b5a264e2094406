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

#include "propflow/tps.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "propflow/text.hpp"

namespace propflow {

using nlohmann::json;

namespace {

// Bookstein's kernel; U(0) = 0 by continuity.
double tps_kernel(double r2) {
    if (r2 <= 0.0) return 0.0;
    return r2 * std::log(r2);
}

} // namespace

std::array<double, 2> TpsWarp::apply(double x, double y) const {
    double out_x = affine_x[0] + affine_x[1] * x + affine_x[2] * y;
    double out_y = affine_y[0] + affine_y[1] * x + affine_y[2] * y;
    for (std::size_t i = 0; i < control_points.size(); ++i) {
        const double dx = x - control_points[i][0];
        const double dy = y - control_points[i][1];
        const double u = tps_kernel(dx * dx + dy * dy);
        out_x += weights_x[i] * u;
        out_y += weights_y[i] * u;
    }
    return {out_x, out_y};
}

TpsWarp tps_fit(std::span<const KeypointPair> pairs, double lambda) {
    const std::size_t m = pairs.size();
    if (m < 3) fail("TooFewKeypoints", "TPS needs at least 3 keypoint pairs");

    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            const double dx = pairs[i].src_x - pairs[j].src_x;
            const double dy = pairs[i].src_y - pairs[j].src_y;
            if (std::sqrt(dx * dx + dy * dy) < 1e-6)
                fail("DegenerateControlPoints",
                     "duplicate source keypoints at index " + std::to_string(i) +
                         " and " + std::to_string(j));
        }

    // [K + lambda*I  P; P^T  0] [w; a] = [k'; 0]
    const auto sz = static_cast<Eigen::Index>(m + 3);
    Eigen::MatrixXd system = Eigen::MatrixXd::Zero(sz, sz);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(sz, 2);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double dx = pairs[i].src_x - pairs[j].src_x;
            const double dy = pairs[i].src_y - pairs[j].src_y;
            system(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                tps_kernel(dx * dx + dy * dy) + (i == j ? lambda : 0.0);
        }
        system(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) = 1.0;
        system(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m + 1)) = pairs[i].src_x;
        system(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m + 2)) = pairs[i].src_y;
        system(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(i)) = 1.0;
        system(static_cast<Eigen::Index>(m + 1), static_cast<Eigen::Index>(i)) = pairs[i].src_x;
        system(static_cast<Eigen::Index>(m + 2), static_cast<Eigen::Index>(i)) = pairs[i].src_y;
        rhs(static_cast<Eigen::Index>(i), 0) = pairs[i].dst_x;
        rhs(static_cast<Eigen::Index>(i), 1) = pairs[i].dst_y;
    }

    const Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
    if (!lu.isInvertible())
        fail("DegenerateControlPoints",
             "singular TPS system (collinear or duplicate source keypoints)");
    const Eigen::MatrixXd solution = lu.solve(rhs);

    TpsWarp warp;
    warp.control_points.reserve(m);
    warp.weights_x.resize(m);
    warp.weights_y.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        warp.control_points.push_back({pairs[i].src_x, pairs[i].src_y});
        warp.weights_x[i] = solution(static_cast<Eigen::Index>(i), 0);
        warp.weights_y[i] = solution(static_cast<Eigen::Index>(i), 1);
    }
    for (int k = 0; k < 3; ++k) {
        warp.affine_x[static_cast<std::size_t>(k)] =
            solution(static_cast<Eigen::Index>(m + static_cast<std::size_t>(k)), 0);
        warp.affine_y[static_cast<std::size_t>(k)] =
            solution(static_cast<Eigen::Index>(m + static_cast<std::size_t>(k)), 1);
    }
    return warp;
}

std::vector<uint32_t> select_rs(const ProposalSet& set, const Box& bbox) {
    if (!box_valid(bbox)) fail("FormatError", "invalid bounding box for region selection");
    std::vector<uint32_t> ids;
    for (const auto& r : set.regions) {
        const double ratio = intersection_area(bbox, r.box) / r.box.area();
        if (ratio >= 0.75) ids.push_back(r.id);
    }
    return ids;
}

Box gt_region(const TpsWarp& warp, const Box& region) {
    const std::array<std::array<double, 2>, 4> corners = {{
        {region.x, region.y},
        {region.x + region.w, region.y},
        {region.x, region.y + region.h},
        {region.x + region.w, region.y + region.h},
    }};
    double min_x = 0, min_y = 0, max_x = 0, max_y = 0;
    for (std::size_t i = 0; i < corners.size(); ++i) {
        const auto p = warp.apply(corners[i][0], corners[i][1]);
        if (i == 0) {
            min_x = max_x = p[0];
            min_y = max_y = p[1];
        } else {
            min_x = std::min(min_x, p[0]);
            max_x = std::max(max_x, p[0]);
            min_y = std::min(min_y, p[1]);
            max_y = std::max(max_y, p[1]);
        }
    }
    const Box gt{min_x, min_y, max_x - min_x, max_y - min_y};
    if (!(gt.w > 0.0) || !(gt.h > 0.0))
        fail("DegenerateGt", "warped region collapsed to zero width or height");
    return gt;
}

std::vector<GtCorrespondence> generate_gt(const TpsWarp& warp, const ProposalSet& set,
                                          std::span<const uint32_t> region_ids) {
    std::vector<GtCorrespondence> out;
    out.reserve(region_ids.size());
    for (uint32_t id : region_ids)
        out.push_back({id, gt_region(warp, set.regions[id].box)});
    return out;
}

KeypointFile load_keypoints(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
        KeypointFile kf;
        kf.src_image = doc.value("src_image", "");
        kf.dst_image = doc.value("dst_image", "");
        for (const auto& p : doc.at("pairs")) {
            if (!p.is_array() || p.size() != 4)
                fail("FormatError", path + ": pair must be [x1,y1,x2,y2]");
            kf.pairs.push_back({p[0].get<double>(), p[1].get<double>(),
                                p[2].get<double>(), p[3].get<double>()});
        }
        auto get_box = [&](const char* key) {
            const auto& b = doc.at(key);
            if (!b.is_array() || b.size() != 4)
                fail("FormatError", path + ": " + key + " must be [x,y,w,h]");
            return Box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                       b[3].get<double>()};
        };
        kf.src_bbox = get_box("src_bbox");
        kf.dst_bbox = get_box("dst_bbox");
        return kf;
    } catch (const json::exception& e) {
        fail("FormatError", path + ": " + e.what());
    }
}

void save_keypoints(const std::string& path, const KeypointFile& kf) {
    json doc;
    doc["src_image"] = kf.src_image;
    doc["dst_image"] = kf.dst_image;
    json pairs = json::array();
    for (const auto& p : kf.pairs)
        pairs.push_back({p.src_x, p.src_y, p.dst_x, p.dst_y});
    doc["pairs"] = std::move(pairs);
    doc["src_bbox"] = {kf.src_bbox.x, kf.src_bbox.y, kf.src_bbox.w, kf.src_bbox.h};
    doc["dst_bbox"] = {kf.dst_bbox.x, kf.dst_bbox.y, kf.dst_bbox.w, kf.dst_bbox.h};
    std::ofstream out(path);
    if (!out) fail("IoError", "cannot write '" + path + "'");
    out << doc.dump(2) << "\n";
    if (!out) fail("IoError", "short write to '" + path + "'");
}

void write_gt_csv(const std::string& path, std::span<const GtCorrespondence> gts) {
    std::ofstream out(path);
    if (!out) fail("IoError", "cannot write '" + path + "'");
    out << "src_region_id,gt_x,gt_y,gt_w,gt_h\n";
    for (const auto& g : gts)
        out << g.src_region_id << "," << format_double(g.gt_box.x) << ","
            << format_double(g.gt_box.y) << "," << format_double(g.gt_box.w) << ","
            << format_double(g.gt_box.h) << "\n";
    if (!out) fail("IoError", "short write to '" + path + "'");
}

std::vector<GtCorrespondence> read_gt_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "src_region_id,gt_x,gt_y,gt_w,gt_h")
        fail("FormatError", path + ": expected header 'src_region_id,gt_x,gt_y,gt_w,gt_h'");
    std::vector<GtCorrespondence> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        const std::string ctx = path + ":" + std::to_string(lineno);
        if (fields.size() != 5) fail("FormatError", ctx + ": expected 5 fields");
        GtCorrespondence g;
        g.src_region_id = static_cast<uint32_t>(parse_long(fields[0], ctx));
        g.gt_box = Box{parse_double(fields[1], ctx), parse_double(fields[2], ctx),
                       parse_double(fields[3], ctx), parse_double(fields[4], ctx)};
        out.push_back(g);
    }
    return out;
}

} // namespace propflow
