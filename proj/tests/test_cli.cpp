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

// End-to-end CLI checks driving the built binary via PROPFLOW_BIN.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "fixtures.hpp"
#include "propflow/flowfield.hpp"
#include "propflow/matching.hpp"
#include "propflow/text.hpp"

namespace fs = std::filesystem;

namespace {

std::string binary() {
    const char* bin = std::getenv("PROPFLOW_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "PROPFLOW_BIN must point at the propflow binary");
    return bin;
}

struct RunResult {
    int status = -1;
    std::string stdout_text;
    std::string stderr_text;
};

RunResult run(const std::string& args, const std::string& tag) {
    const std::string dir = fixtures::temp_dir("cli_io_" + tag);
    const std::string out_file = dir + "/stdout.txt";
    const std::string err_file = dir + "/stderr.txt";
    const std::string cmd =
        binary() + " " + args + " > " + out_file + " 2> " + err_file;
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    auto slurp = [](const std::string& p) {
        std::ifstream in(p);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    r.stdout_text = slurp(out_file);
    r.stderr_text = slurp(err_file);
    fs::remove_all(dir);
    return r;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

double parse_metric(const std::string& text, const std::string& key) {
    const auto at = text.find(key + "=");
    REQUIRE(at != std::string::npos);
    const auto end = text.find('\n', at);
    return std::stod(text.substr(at + key.size() + 1, end - at - key.size() - 1));
}

} // namespace

TEST_CASE("synth -> match -> flow -> eval pipeline on an identity pair") {
    const std::string root = fixtures::temp_dir("cli_pipeline");
    const std::string fixture = root + "/fixture";
    const std::string work = root + "/work";

    const RunResult synth = run("synth --seed 5 --width 200 --height 150 --objects 2 "
                                "--proposals-per-object 10 --out " + fixture,
                                "synth");
    REQUIRE(synth.status == 0);
    CHECK(synth.stdout_text.find("seed=5") != std::string::npos);
    CHECK(fs::exists(fixture + "/src.json"));
    CHECK(fs::exists(fixture + "/img1.pgm"));
    CHECK(fs::exists(fixture + "/keypoints.json"));
    CHECK(fs::exists(fixture + "/truth.csv"));

    const std::string src = fixture + "/src.json";
    const std::string dst = fixture + "/dst.json";

    const RunResult match = run("match " + src + " " + dst +
                                " --matcher lom --out " + work, "match");
    REQUIRE(match.status == 0);
    CHECK(match.stdout_text.find("match_time_ms=") != std::string::npos);
    REQUIRE(fs::exists(work + "/matches.csv"));

    // Identity fixture: every source matches itself.
    const propflow::MatchSet matches = propflow::read_match_csv(work + "/matches.csv");
    for (const auto& e : matches.entries) CHECK(e.src_id == e.dst_id);

    const RunResult flow = run("flow " + src + " " + dst + " " + work +
                               "/matches.csv --guide " + fixture + "/img1.pgm" +
                               " --warp --out " + work, "flow");
    REQUIRE(flow.status == 0);
    REQUIRE(fs::exists(work + "/flow.flo"));
    CHECK(fs::exists(work + "/warped.pgm"));

    const propflow::FlowField field = propflow::read_flo(work + "/flow.flo");
    double max_flow = 0.0;
    for (std::size_t i = 0; i < field.u.size(); ++i)
        max_flow = std::max({max_flow, std::abs(field.u[i]), std::abs(field.v[i])});
    CHECK(max_flow < 1e-9);

    const RunResult pck = run("eval-pck " + work + "/flow.flo " + fixture +
                              "/keypoints.json --alpha 0.1 --out " + work, "pck");
    REQUIRE(pck.status == 0);
    CHECK(parse_metric(pck.stdout_text, "pck") == 1.0);

    const RunResult gtgen = run("gtgen " + fixture + "/keypoints.json " + src +
                                " --out " + work, "gtgen");
    REQUIRE(gtgen.status == 0);
    REQUIRE(fs::exists(work + "/gt.csv"));

    const RunResult pcr = run("eval-pcr " + work + "/matches.csv " + dst + " " + work +
                              "/gt.csv --iou-thresh 0.5 --out " + work, "pcr");
    REQUIRE(pcr.status == 0);
    CHECK(fs::exists(work + "/pcr.csv"));
    CHECK(fs::exists(work + "/pcr.svg"));
    // Identity matches against TPS-identity ground truth: perfect curve,
    // and every ground-truthed region is correct at IoU 0.5.
    CHECK(parse_metric(pcr.stdout_text, "pcr_auc") == doctest::Approx(1.0).epsilon(1e-9));
    std::ifstream gt_in(work + "/gt.csv");
    const std::size_t gt_rows = std::count(std::istreambuf_iterator<char>(gt_in),
                                           std::istreambuf_iterator<char>(), '\n') - 1;
    CHECK(parse_metric(pcr.stdout_text, "correct_at_iou") ==
          static_cast<double>(gt_rows));

    const RunResult miou = run("eval-miou " + work + "/matches.csv " + dst + " " + work +
                               "/gt.csv --out " + work, "miou");
    REQUIRE(miou.status == 0);
    CHECK(fs::exists(work + "/miou.csv"));
    CHECK(parse_metric(miou.stdout_text, "miou_auc") ==
          doctest::Approx(1.0).epsilon(1e-9));

    const RunResult lno = run("leave-n-out " + fixture +
                              "/keypoints.json --n 2 --trials 5 --seed 3 --out " + work,
                              "lno");
    REQUIRE(lno.status == 0);
    CHECK(parse_metric(lno.stdout_text, "mean_pck") == 1.0); // identity is affine

    fs::remove_all(root);
}

TEST_CASE("match runs are byte-identical across invocations and thread counts") {
    const std::string root = fixtures::temp_dir("cli_determinism");
    const std::string fixture = root + "/fixture";
    REQUIRE(run("synth --seed 11 --width 200 --height 150 --clutter 6 "
                "--feature-noise 0.1 --transform 1.1,0,15,0,1.1,-8 --out " + fixture,
                "synth2").status == 0);

    const std::string a = root + "/a";
    const std::string b = root + "/b";
    const std::string c = root + "/c";
    const std::string args = "match " + fixture + "/src.json " + fixture +
                             "/dst.json --matcher phm --out ";
    REQUIRE(run(args + a, "m1").status == 0);
    REQUIRE(run(args + b, "m2").status == 0);
    // Single- vs multi-worker runs must agree bit for bit.
    const std::string one_thread =
        "env PROPFLOW_THREADS=1 " + binary() + " " + args + c;
    REQUIRE(std::system((one_thread + " > /dev/null 2>&1").c_str()) == 0);
    CHECK(read_file(a + "/matches.csv") == read_file(b + "/matches.csv"));
    CHECK(read_file(a + "/matches.csv") == read_file(c + "/matches.csv"));

    // Known-affine pair: LOM flow transfers every keypoint within the
    // PCK threshold.
    const std::string work = root + "/work";
    REQUIRE(run("match " + fixture + "/src.json " + fixture +
                "/dst.json --matcher lom --out " + work, "m4").status == 0);
    REQUIRE(run("flow " + fixture + "/src.json " + fixture + "/dst.json " + work +
                "/matches.csv --guide " + fixture + "/img1.pgm --out " + work,
                "f4").status == 0);
    const RunResult pck = run("eval-pck " + work + "/flow.flo " + fixture +
                              "/keypoints.json --alpha 0.1 --out " + work, "p4");
    REQUIRE(pck.status == 0);
    CHECK(parse_metric(pck.stdout_text, "pck") == 1.0);
    fs::remove_all(root);
}

TEST_CASE("--max-proposals truncates the source rows") {
    const std::string root = fixtures::temp_dir("cli_truncate");
    const std::string fixture = root + "/fixture";
    REQUIRE(run("synth --seed 13 --width 200 --height 150 --objects 1 "
                "--proposals-per-object 30 --out " + fixture, "synth3").status == 0);
    const std::string work = root + "/work";
    REQUIRE(run("match " + fixture + "/src.json " + fixture +
                "/dst.json --matcher nam --max-proposals 10 --out " + work,
                "m3").status == 0);
    const propflow::MatchSet matches = propflow::read_match_csv(work + "/matches.csv");
    CHECK(matches.entries.size() == 10);
    fs::remove_all(root);
}

TEST_CASE("failures exit nonzero with a single-line machine-parsable error") {
    const std::string root = fixtures::temp_dir("cli_errors");
    const RunResult missing =
        run("match /nonexistent/a.json /nonexistent/b.json --out " + root, "err1");
    CHECK(missing.status != 0);
    CHECK(missing.stderr_text.rfind("error: ", 0) == 0);
    CHECK(missing.stderr_text.find('\n') == missing.stderr_text.size() - 1);

    const RunResult bad_sub = run("frobnicate --out " + root, "err2");
    CHECK(bad_sub.status != 0);

    // Degenerate keypoints surface the error kind.
    const std::string kp = root + "/bad_kp.json";
    std::ofstream out(kp);
    out << R"({"pairs": [[0,0,0,0],[1,1,1,1]], "src_bbox": [0,0,10,10],
               "dst_bbox": [0,0,10,10]})";
    out.close();
    const RunResult lno = run("leave-n-out " + kp + " --n 1 --out " + root, "err3");
    CHECK(lno.status != 0);
    CHECK(lno.stderr_text.find("TooFewKeypoints") != std::string::npos);
    fs::remove_all(root);
}

TEST_CASE("sliding-windows writes a loadable manifest") {
    const std::string root = fixtures::temp_dir("cli_sw");
    const RunResult sw = run("sliding-windows --width 100 --height 100 --scales 50 "
                             "--aspects 1 --stride-frac 0.5 --out " + root, "sw");
    REQUIRE(sw.status == 0);
    CHECK(sw.stdout_text.find("windows=9") != std::string::npos);
    const propflow::ProposalSet set =
        propflow::load_proposals(root + "/windows.json", /*need_features=*/false);
    CHECK(set.size() == 9);
    fs::remove_all(root);
}
