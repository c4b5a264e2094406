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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "propflow/image.hpp"
#include "propflow/proposals.hpp"

using namespace propflow;
namespace fs = std::filesystem;

TEST_CASE("manifest with inline features round-trips") {
    const std::string dir = fixtures::temp_dir("manifest_inline");
    const ProposalSet set = fixtures::random_set(41, 7);
    const std::string path = dir + "/set.json";
    save_proposals(path, set, /*inline_features=*/true);
    const ProposalSet back = load_proposals(path);

    REQUIRE(back.size() == set.size());
    CHECK(back.image_width == set.image_width);
    CHECK(back.descriptor_id == set.descriptor_id);
    for (std::size_t i = 0; i < set.size(); ++i) {
        CHECK(back.regions[i].id == set.regions[i].id);
        CHECK(back.regions[i].box.x == set.regions[i].box.x);
        CHECK(back.regions[i].box.y == set.regions[i].box.y);
        CHECK(back.regions[i].box.w == set.regions[i].box.w);
        CHECK(back.regions[i].box.h == set.regions[i].box.h);
        REQUIRE(back.regions[i].feature.values.size() ==
                set.regions[i].feature.values.size());
        for (std::size_t d = 0; d < set.regions[i].feature.values.size(); ++d)
            CHECK(back.regions[i].feature.values[d] == set.regions[i].feature.values[d]);
    }
    fs::remove_all(dir);
}

TEST_CASE("manifest with a PFFT sidecar resolves features") {
    const std::string dir = fixtures::temp_dir("manifest_sidecar");
    ProposalSet set = fixtures::random_set(43, 5);
    // Quantize to f32 so the sidecar round-trip is exact.
    for (auto& r : set.regions)
        for (auto& v : r.feature.values) v = static_cast<float>(v);
    const std::string path = dir + "/set.json";
    save_proposals(path, set, /*inline_features=*/false);
    CHECK(fs::exists(dir + "/set.pfft"));

    const ProposalSet back = load_proposals(path);
    REQUIRE(back.size() == set.size());
    for (std::size_t i = 0; i < set.size(); ++i)
        for (std::size_t d = 0; d < set.regions[i].feature.values.size(); ++d)
            CHECK(back.regions[i].feature.values[d] == set.regions[i].feature.values[d]);
    fs::remove_all(dir);
}

TEST_CASE("manifest without features computes the built-in descriptor") {
    const std::string dir = fixtures::temp_dir("manifest_hog");
    RasterImage img = RasterImage::make(96, 96, 1, 0);
    for (uint32_t y = 0; y < img.height; ++y)
        for (uint32_t x = 0; x < img.width; ++x)
            img.set(x, y, 0, static_cast<uint8_t>((x / 8 + y / 8) % 2 ? 200 : 30));
    write_pnm(img, dir + "/img.pgm");

    ProposalSet set;
    set.image_width = 96;
    set.image_height = 96;
    set.image_path = "img.pgm";
    set.descriptor_id = HogConfig{}.descriptor_id();
    for (uint32_t i = 0; i < 3; ++i) {
        Region r;
        r.id = i;
        r.box = Box{4.0 + 10.0 * i, 6.0, 40.0, 40.0};
        r.feature.descriptor_id = set.descriptor_id;
        set.regions.push_back(r);
    }
    const std::string path = dir + "/set.json";
    save_proposals(path, set);

    const ProposalSet loaded = load_proposals(path);
    REQUIRE(loaded.size() == 3);
    for (const auto& r : loaded.regions) {
        CHECK(r.feature.values.size() ==
              static_cast<std::size_t>(HogConfig{}.descriptor_length()));
    }
    // Identical to describing directly.
    const FeatureVec direct = hog_describe(img, set.regions[1].box);
    for (std::size_t d = 0; d < direct.values.size(); ++d)
        CHECK(loaded.regions[1].feature.values[d] == direct.values[d]);

    // Without features and with a non-builtin descriptor the load fails.
    ProposalSet alien = set;
    alien.descriptor_id = "convnet-pool5";
    for (auto& r : alien.regions) r.feature.descriptor_id = alien.descriptor_id;
    save_proposals(dir + "/alien.json", alien);
    CHECK_THROWS_AS(load_proposals(dir + "/alien.json"), Error);
    CHECK_NOTHROW(load_proposals(dir + "/alien.json", /*need_features=*/false));
    fs::remove_all(dir);
}

TEST_CASE("degenerate boxes are rejected at ingest") {
    const std::string dir = fixtures::temp_dir("manifest_degenerate");
    const std::string path = dir + "/bad.json";
    std::ofstream out(path);
    out << R"({"width": 100, "height": 100, "descriptor_id": "x",
               "boxes": [[0, 0, 10, 0]], "features": [[1.0]]})";
    out.close();
    CHECK_THROWS_AS(load_proposals(path), Error);
    try {
        load_proposals(path);
    } catch (const Error& e) {
        CHECK(e.kind() == "FormatError");
    }
    fs::remove_all(dir);
}

TEST_CASE("truncation keeps top scores or file order") {
    ProposalSet set = fixtures::random_set(47, 6);

    SUBCASE("file order when no scores") {
        const ProposalSet cut = truncate_proposals(set, 4);
        REQUIRE(cut.size() == 4);
        for (uint32_t i = 0; i < 4; ++i) {
            CHECK(cut.regions[i].id == i);
            CHECK(cut.regions[i].box.x == set.regions[i].box.x);
        }
    }

    SUBCASE("descending score otherwise, survivors in file order") {
        set.scores = {0.1, 0.9, 0.3, 0.8, 0.2, 0.7};
        const ProposalSet cut = truncate_proposals(set, 3);
        REQUIRE(cut.size() == 3);
        // Scores pick indices {1, 3, 5}; file order preserved, ids reassigned.
        CHECK(cut.regions[0].box.x == set.regions[1].box.x);
        CHECK(cut.regions[1].box.x == set.regions[3].box.x);
        CHECK(cut.regions[2].box.x == set.regions[5].box.x);
        CHECK(cut.regions[0].id == 0);
        CHECK(cut.regions[2].id == 2);
        CHECK(cut.scores == std::vector<double>{0.9, 0.8, 0.7});
    }

    SUBCASE("no-op when under the cap") {
        const ProposalSet cut = truncate_proposals(set, 100);
        CHECK(cut.size() == set.size());
    }
}
