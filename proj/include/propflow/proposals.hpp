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

#include "propflow/features.hpp"
#include "propflow/geometry.hpp"

namespace propflow {

struct Region {
    uint32_t id = 0;
    Box box;
    FeatureVec feature;
};

// One image's object proposals. Region ids are 0..n-1 in file order and
// all features share one descriptor_id.
struct ProposalSet {
    uint32_t image_width = 0;
    uint32_t image_height = 0;
    std::string image_path; // may be empty
    std::string descriptor_id;
    std::vector<Region> regions;
    std::vector<double> scores; // optional proposal scores, empty if absent

    std::size_t size() const { return regions.size(); }
};

// Loads a proposal manifest:
//   {image, width, height, descriptor_id, boxes: [[x,y,w,h],...],
//    features: [[...],...] | features_file: "side.pfft", scores: [...]}
// Feature resolution order: inline values, then the PFFT sidecar (path
// relative to the manifest), then on-the-fly hog_describe when the
// descriptor_id matches the built-in pattern and the image is readable.
// With need_features=false the feature arrays may be absent.
ProposalSet load_proposals(const std::string& manifest_path, bool need_features = true);

// Writes a manifest; features go to a PFFT sidecar next to the manifest
// when inline_features is false (and are omitted entirely if the set has
// no feature values).
void save_proposals(const std::string& manifest_path, const ProposalSet& set,
                    bool inline_features = false);

// Keeps the top max_proposals by descending score when scores are
// present (file order breaks ties), by file order otherwise; survivors
// keep their relative file order and are re-indexed 0..k-1.
ProposalSet truncate_proposals(const ProposalSet& set, uint32_t max_proposals);

} // namespace propflow
