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

#include "propflow/proposals.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "propflow/parallel.hpp"

namespace propflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail("FormatError", path + ": " + e.what());
    }
}

std::string resolve_sibling(const std::string& manifest_path, const std::string& rel) {
    const fs::path p(rel);
    if (p.is_absolute()) return rel;
    return (fs::path(manifest_path).parent_path() / p).string();
}

bool is_builtin_hog_id(const std::string& id) {
    return id.rfind("hog-", 0) == 0;
}

// "hog-g8c8b9" -> HogConfig{8, 8, 9}; throws on anything malformed.
HogConfig parse_hog_id(const std::string& id) {
    HogConfig cfg;
    const auto g = id.find('g', 4); // skip the "hog-" prefix
    const auto c = id.find('c', 4);
    const auto b = id.find('b', 4);
    if (g == std::string::npos || c == std::string::npos || b == std::string::npos ||
        !(g < c && c < b))
        fail("ConfigError", "cannot derive HOG config from descriptor_id '" + id + "'");
    try {
        cfg.grid = std::stoi(id.substr(g + 1, c - g - 1));
        cfg.cell_px = std::stoi(id.substr(c + 1, b - c - 1));
        cfg.bins = std::stoi(id.substr(b + 1));
    } catch (const std::exception&) {
        fail("ConfigError", "cannot derive HOG config from descriptor_id '" + id + "'");
    }
    if (cfg.grid < 2 || cfg.cell_px < 1 || cfg.bins < 1)
        fail("ConfigError", "bad HOG config in descriptor_id '" + id + "'");
    return cfg;
}

} // namespace

ProposalSet load_proposals(const std::string& manifest_path, bool need_features) {
    const json doc = load_json(manifest_path);
    ProposalSet set;
    try {
        set.image_width = doc.at("width").get<uint32_t>();
        set.image_height = doc.at("height").get<uint32_t>();
        set.descriptor_id = doc.at("descriptor_id").get<std::string>();
        if (doc.contains("image")) set.image_path = doc["image"].get<std::string>();

        const auto& boxes = doc.at("boxes");
        set.regions.reserve(boxes.size());
        uint32_t id = 0;
        for (const auto& b : boxes) {
            if (!b.is_array() || b.size() != 4)
                fail("FormatError", manifest_path + ": box " + std::to_string(id) +
                                        " must be [x,y,w,h]");
            Region r;
            r.id = id++;
            r.box = Box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                        b[3].get<double>()};
            if (!box_valid(r.box))
                fail("FormatError", manifest_path + ": degenerate box " +
                                        std::to_string(r.id) + " (w,h must be > 0)");
            r.feature.descriptor_id = set.descriptor_id;
            set.regions.push_back(std::move(r));
        }

        if (doc.contains("scores")) {
            set.scores = doc["scores"].get<std::vector<double>>();
            if (set.scores.size() != set.regions.size())
                fail("FormatError", manifest_path + ": scores/boxes count mismatch");
        }

        if (doc.contains("features")) {
            const auto& feats = doc["features"];
            if (feats.size() != set.regions.size())
                fail("FormatError", manifest_path + ": features/boxes count mismatch");
            std::size_t dim = 0;
            for (std::size_t i = 0; i < set.regions.size(); ++i) {
                set.regions[i].feature.values = feats[i].get<std::vector<double>>();
                if (i == 0) dim = set.regions[0].feature.values.size();
                else if (set.regions[i].feature.values.size() != dim)
                    fail("FormatError", manifest_path + ": ragged feature rows");
            }
        } else if (doc.contains("features_file")) {
            const std::string side =
                resolve_sibling(manifest_path, doc["features_file"].get<std::string>());
            const auto rows = read_pfft(side);
            if (rows.size() != set.regions.size())
                fail("FormatError", side + ": feature count does not match boxes");
            for (std::size_t i = 0; i < rows.size(); ++i) {
                auto& v = set.regions[i].feature.values;
                v.assign(rows[i].begin(), rows[i].end());
            }
        } else if (need_features) {
            if (!is_builtin_hog_id(set.descriptor_id) || set.image_path.empty())
                fail("FormatError", manifest_path +
                                        ": no features, no features_file, and no "
                                        "built-in descriptor to compute them with");
            const HogConfig cfg = parse_hog_id(set.descriptor_id);
            const RasterImage img =
                read_pnm(resolve_sibling(manifest_path, set.image_path));
            parallel_for(set.regions.size(), [&](std::size_t i) {
                set.regions[i].feature = hog_describe(img, set.regions[i].box, cfg);
            });
        }
    } catch (const json::exception& e) {
        fail("FormatError", manifest_path + ": " + e.what());
    }
    return set;
}

void save_proposals(const std::string& manifest_path, const ProposalSet& set,
                    bool inline_features) {
    json doc;
    if (!set.image_path.empty()) doc["image"] = set.image_path;
    doc["width"] = set.image_width;
    doc["height"] = set.image_height;
    doc["descriptor_id"] = set.descriptor_id;
    json boxes = json::array();
    for (const auto& r : set.regions)
        boxes.push_back({r.box.x, r.box.y, r.box.w, r.box.h});
    doc["boxes"] = std::move(boxes);
    if (!set.scores.empty()) doc["scores"] = set.scores;

    const bool have_values =
        !set.regions.empty() && !set.regions.front().feature.values.empty();
    std::string sidecar;
    if (have_values) {
        if (inline_features) {
            json feats = json::array();
            for (const auto& r : set.regions) feats.push_back(r.feature.values);
            doc["features"] = std::move(feats);
        } else {
            sidecar = fs::path(manifest_path).stem().string() + ".pfft";
            doc["features_file"] = sidecar;
        }
    }

    std::ofstream out(manifest_path);
    if (!out) fail("IoError", "cannot write '" + manifest_path + "'");
    out << doc.dump(2) << "\n";
    if (!out) fail("IoError", "short write to '" + manifest_path + "'");

    if (have_values && !inline_features) {
        std::vector<std::vector<float>> rows;
        rows.reserve(set.regions.size());
        for (const auto& r : set.regions)
            rows.emplace_back(r.feature.values.begin(), r.feature.values.end());
        write_pfft(resolve_sibling(manifest_path, sidecar), rows);
    }
}

ProposalSet truncate_proposals(const ProposalSet& set, uint32_t max_proposals) {
    if (max_proposals < 1) fail("ConfigError", "max_proposals must be >= 1");
    if (set.size() <= max_proposals) {
        ProposalSet out = set;
        return out;
    }

    std::vector<std::size_t> keep;
    if (set.scores.empty()) {
        keep.resize(max_proposals);
        std::iota(keep.begin(), keep.end(), 0);
    } else {
        std::vector<std::size_t> order(set.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return set.scores[a] > set.scores[b];
        });
        keep.assign(order.begin(), order.begin() + max_proposals);
        std::sort(keep.begin(), keep.end()); // survivors stay in file order
    }

    ProposalSet out;
    out.image_width = set.image_width;
    out.image_height = set.image_height;
    out.image_path = set.image_path;
    out.descriptor_id = set.descriptor_id;
    out.regions.reserve(keep.size());
    if (!set.scores.empty()) out.scores.reserve(keep.size());
    uint32_t id = 0;
    for (std::size_t idx : keep) {
        Region r = set.regions[idx];
        r.id = id++;
        out.regions.push_back(std::move(r));
        if (!set.scores.empty()) out.scores.push_back(set.scores[idx]);
    }
    return out;
}

} // namespace propflow
