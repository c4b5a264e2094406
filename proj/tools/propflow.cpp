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

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "propflow/eval.hpp"
#include "propflow/flowfield.hpp"
#include "propflow/matching.hpp"
#include "propflow/synth.hpp"
#include "propflow/text.hpp"
#include "propflow/tps.hpp"

namespace fs = std::filesystem;
using namespace propflow;

namespace {

struct CommonArgs {
    std::string out_dir;
    uint32_t max_proposals = 1000;
    std::optional<uint64_t> seed;
};

void prepare_out(const CommonArgs& common) {
    if (common.out_dir.empty()) fail("ConfigError", "--out is required");
    fs::create_directories(common.out_dir);
    if (common.seed) std::cout << "seed=" << *common.seed << "\n";
}

std::string out_path(const CommonArgs& common, const std::string& name) {
    return (fs::path(common.out_dir) / name).string();
}

std::string resolve_relative(const std::string& anchor_file, const std::string& rel) {
    const fs::path p(rel);
    if (p.is_absolute()) return rel;
    return (fs::path(anchor_file).parent_path() / p).string();
}

struct MatchArgs {
    CommonArgs common;
    std::string src_manifest;
    std::string dst_manifest;
    std::string matcher = "lom";
    std::string similarity = "rectified_dot";
    double temperature = 1.0;
    double sigma_xy = 0.0; // 0 = derive from the source image size
    double sigma_ls = 0.0; // 0 = ln(2)/2
    std::string phm_mode = "binned";
    double bin_xy = 0.0;
    double bin_ls = 0.0;
};

KernelParams kernel_from_args(double sigma_xy, double sigma_ls, const ProposalSet& src) {
    KernelParams k = default_kernel_params(src.image_width, src.image_height);
    if (sigma_xy > 0.0) k.sigma_xy = sigma_xy;
    if (sigma_ls > 0.0) k.sigma_ls = sigma_ls;
    return k;
}

int cmd_match(const MatchArgs& args) {
    prepare_out(args.common);
    const ProposalSet src =
        truncate_proposals(load_proposals(args.src_manifest), args.common.max_proposals);
    const ProposalSet dst =
        truncate_proposals(load_proposals(args.dst_manifest), args.common.max_proposals);

    SimilarityFn sim;
    sim.kind = similarity_kind_from_string(args.similarity);
    sim.temperature = args.temperature;
    const KernelParams kernel = kernel_from_args(args.sigma_xy, args.sigma_ls, src);

    const auto start = std::chrono::steady_clock::now();
    MatchSet matches;
    if (args.matcher == "nam") {
        matches = match_nam(src, dst, sim);
    } else if (args.matcher == "phm") {
        PhmConfig cfg;
        cfg.kernel = kernel;
        cfg.bin_xy = args.bin_xy;
        cfg.bin_ls = args.bin_ls;
        if (args.phm_mode == "exact") cfg.mode = PhmConfig::Mode::exact;
        else if (args.phm_mode == "binned") cfg.mode = PhmConfig::Mode::binned;
        else fail("ConfigError", "unknown --phm-mode '" + args.phm_mode + "'");
        matches = match_phm(src, dst, sim, cfg);
    } else if (args.matcher == "lom") {
        LomConfig cfg;
        cfg.kernel = kernel;
        matches = match_lom(src, dst, sim, cfg);
    } else {
        fail("ConfigError", "unknown --matcher '" + args.matcher + "'");
    }
    const auto elapsed = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - start)
                             .count();

    write_match_csv(out_path(args.common, "matches.csv"), matches);
    std::cout << "matcher=" << args.matcher << " n=" << src.size() << " m=" << dst.size()
              << "\n";
    std::cout << "match_time_ms=" << format_double(elapsed) << "\n";
    return 0;
}

struct FlowArgs {
    CommonArgs common;
    std::string src_manifest;
    std::string dst_manifest;
    std::string match_csv;
    std::string guide_path;
    bool warp = false;
};

int cmd_flow(const FlowArgs& args) {
    prepare_out(args.common);
    const ProposalSet src = truncate_proposals(
        load_proposals(args.src_manifest, /*need_features=*/false),
        args.common.max_proposals);
    const ProposalSet dst = truncate_proposals(
        load_proposals(args.dst_manifest, /*need_features=*/false),
        args.common.max_proposals);
    const MatchSet matches = read_match_csv(args.match_csv);
    if (matches.entries.size() != src.size())
        fail("FormatError", "match CSV rows (" + std::to_string(matches.entries.size()) +
                                ") do not cover the source set (" +
                                std::to_string(src.size()) + ")");

    const AnchorIndex anchors = build_anchor_index(src, matches);
    FlowField flow = synthesize_flow(src, dst, matches, anchors);

    std::optional<RasterImage> guide;
    if (!args.guide_path.empty()) guide = read_pnm(args.guide_path);
    flow = fill_holes(flow, guide ? &*guide : nullptr);
    flow.quantize_f32();
    write_flo(out_path(args.common, "flow.flo"), flow);

    if (args.warp) {
        if (dst.image_path.empty())
            fail("ConfigError", "--warp needs an 'image' entry in the second manifest");
        const RasterImage second =
            read_pnm(resolve_relative(args.dst_manifest, dst.image_path));
        const RasterImage warped = warp_image(second, flow);
        const std::string name = warped.channels == 3 ? "warped.ppm" : "warped.pgm";
        write_pnm(warped, out_path(args.common, name));
    }
    return 0;
}

struct GtgenArgs {
    CommonArgs common;
    std::string keypoints_path;
    std::string src_manifest;
    double lambda = 0.0;
    bool filter_dst_bbox = false;
};

int cmd_gtgen(const GtgenArgs& args) {
    prepare_out(args.common);
    const KeypointFile kf = load_keypoints(args.keypoints_path);
    const ProposalSet src = truncate_proposals(
        load_proposals(args.src_manifest, /*need_features=*/false),
        args.common.max_proposals);
    const TpsWarp warp = tps_fit(kf.pairs, args.lambda);
    const std::vector<uint32_t> rs = select_rs(src, kf.src_bbox);
    std::vector<GtCorrespondence> gts = generate_gt(warp, src, rs);
    if (args.filter_dst_bbox) {
        std::erase_if(gts, [&](const GtCorrespondence& g) {
            return intersection_area(kf.dst_bbox, g.gt_box) / g.gt_box.area() < 0.75;
        });
    }
    write_gt_csv(out_path(args.common, "gt.csv"), gts);
    std::cout << "rs_regions=" << gts.size() << "\n";
    return 0;
}

struct EvalCurveArgs {
    CommonArgs common;
    std::string match_csv;
    std::string dst_manifest;
    std::string gt_csv;
    double iou_thresh = 0.5;
};

int cmd_eval_pcr(const EvalCurveArgs& args) {
    prepare_out(args.common);
    const MatchSet matches = read_match_csv(args.match_csv);
    const ProposalSet dst = truncate_proposals(
        load_proposals(args.dst_manifest, /*need_features=*/false),
        args.common.max_proposals);
    const auto gts = read_gt_csv(args.gt_csv);
    const auto taus = default_tau_grid();
    const Curve curve = pcr(matches, dst, gts, taus);
    write_curve_csv(out_path(args.common, "pcr.csv"), curve, "tau");
    write_curve_svg(out_path(args.common, "pcr.svg"), curve, "PCR");
    std::cout << "pcr_auc=" << format_double(auc(curve)) << "\n";

    // Correct-match count at a single IoU threshold (inclusive).
    std::size_t correct = 0;
    for (const auto& g : gts) {
        for (const auto& e : matches.entries)
            if (e.src_id == g.src_region_id) {
                if (iou(dst.regions[e.dst_id].box, g.gt_box) >= args.iou_thresh)
                    ++correct;
                break;
            }
    }
    std::cout << "correct_at_iou=" << correct << "\n";
    return 0;
}

int cmd_eval_miou(const EvalCurveArgs& args) {
    prepare_out(args.common);
    const MatchSet matches = read_match_csv(args.match_csv);
    const ProposalSet dst = truncate_proposals(
        load_proposals(args.dst_manifest, /*need_features=*/false),
        args.common.max_proposals);
    const auto gts = read_gt_csv(args.gt_csv);
    const Curve curve = miou_at_k(matches, dst, gts);
    write_curve_csv(out_path(args.common, "miou.csv"), curve, "k");
    write_curve_svg(out_path(args.common, "miou.svg"), curve, "mIoU@k");
    std::cout << "miou_auc=" << format_double(auc(curve)) << "\n";
    return 0;
}

struct PckArgs {
    CommonArgs common;
    std::string flow_path;
    std::string keypoints_path;
    double alpha = 0.1;
    std::string bbox_source = "dst"; // which object box scales the threshold
};

int cmd_eval_pck(const PckArgs& args) {
    prepare_out(args.common);
    const FlowField flow = read_flo(args.flow_path);
    const KeypointFile kf = load_keypoints(args.keypoints_path);
    Box bbox;
    if (args.bbox_source == "dst") bbox = kf.dst_bbox;
    else if (args.bbox_source == "src") bbox = kf.src_bbox;
    else fail("ConfigError", "--bbox must be 'src' or 'dst'");
    const PckResult result = pck_flow(flow, kf.pairs, bbox, args.alpha);
    const std::string line = "pck=" + format_double(result.pck());
    std::ofstream out(out_path(args.common, "pck.txt"));
    out << line << "\n";
    std::cout << line << "\n";
    return 0;
}

struct LeaveNOutArgs {
    CommonArgs common;
    std::string keypoints_path;
    uint32_t n = 1;
    uint32_t trials = 10;
    double alpha = 0.1;
};

int cmd_leave_n_out(const LeaveNOutArgs& args) {
    prepare_out(args.common);
    const KeypointFile kf = load_keypoints(args.keypoints_path);
    const uint64_t seed = args.common.seed.value_or(1);
    const double mean =
        leave_n_out(kf.pairs, args.n, args.trials, args.alpha, seed, kf.dst_bbox);
    const std::string line = "mean_pck=" + format_double(mean);
    std::ofstream out(out_path(args.common, "leave_n_out.txt"));
    out << line << "\n";
    std::cout << line << "\n";
    return 0;
}

struct SynthArgs {
    CommonArgs common;
    SynthConfig cfg;
    std::vector<double> transform;
};

int cmd_synth(SynthArgs args) {
    args.cfg.seed = args.common.seed.value_or(args.cfg.seed);
    if (!args.transform.empty()) {
        if (args.transform.size() != 6)
            fail("ConfigError", "--transform needs 6 values a,b,c,d,e,f");
        args.cfg.global_transform = {args.transform[0], args.transform[1],
                                     args.transform[2], args.transform[3],
                                     args.transform[4], args.transform[5]};
    }
    if (!args.common.seed) std::cout << "seed=" << args.cfg.seed << "\n";
    prepare_out(args.common);
    const SynthPair pair = generate(args.cfg);
    save_synth(args.common.out_dir, pair);
    std::cout << "proposals=" << pair.src.size() << " keypoints="
              << pair.keypoints.size() << "\n";
    return 0;
}

struct SlidingArgs {
    CommonArgs common;
    uint32_t width = 0;
    uint32_t height = 0;
    std::vector<double> scales;
    std::vector<double> aspects;
    double stride_frac = 0.5;
    std::string image_path;
    std::string descriptor_id = HogConfig{}.descriptor_id();
};

int cmd_sliding_windows(const SlidingArgs& args) {
    prepare_out(args.common);
    const std::vector<double> scales =
        args.scales.empty() ? default_sw_scales(args.width, args.height) : args.scales;
    const std::vector<double> aspects =
        args.aspects.empty() ? default_sw_aspects() : args.aspects;
    const std::vector<Box> boxes =
        sliding_window_boxes(args.width, args.height, scales, aspects, args.stride_frac);

    ProposalSet set;
    set.image_width = args.width;
    set.image_height = args.height;
    set.image_path = args.image_path;
    set.descriptor_id = args.descriptor_id;
    set.regions.reserve(boxes.size());
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        Region r;
        r.id = static_cast<uint32_t>(i);
        r.box = boxes[i];
        r.feature.descriptor_id = set.descriptor_id;
        set.regions.push_back(std::move(r));
    }
    save_proposals(out_path(args.common, "windows.json"), set);
    std::cout << "windows=" << boxes.size() << "\n";
    return 0;
}

void add_common(CLI::App* cmd, CommonArgs& common, bool with_max_proposals = true) {
    cmd->add_option("--out", common.out_dir, "Output directory")->required();
    if (with_max_proposals)
        cmd->add_option("--max-proposals", common.max_proposals,
                        "Keep at most this many proposals per set");
    cmd->add_option("--seed", common.seed, "RNG seed (echoed in the log)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"proposal-flow region matching, dense flow, and benchmarking"};
    app.require_subcommand(1);

    MatchArgs match_args;
    auto* match_cmd = app.add_subcommand("match", "Match two proposal sets");
    match_cmd->add_option("src", match_args.src_manifest, "Source proposal manifest")
        ->required();
    match_cmd->add_option("dst", match_args.dst_manifest, "Destination proposal manifest")
        ->required();
    match_cmd->add_option("--matcher", match_args.matcher, "nam | phm | lom");
    match_cmd->add_option("--similarity", match_args.similarity,
                          "rectified_dot | chi2_kernel | l2_gaussian");
    match_cmd->add_option("--temperature", match_args.temperature,
                          "Temperature for chi2_kernel / l2_gaussian");
    match_cmd->add_option("--sigma-xy", match_args.sigma_xy,
                          "Kernel bandwidth in px (default 5% of image size)");
    match_cmd->add_option("--sigma-ls", match_args.sigma_ls,
                          "Kernel log-scale bandwidth (default ln(2)/2)");
    match_cmd->add_option("--phm-mode", match_args.phm_mode, "exact | binned");
    match_cmd->add_option("--bin-xy", match_args.bin_xy,
                          "Hough bin size in px (default sigma_xy/2)");
    match_cmd->add_option("--bin-ls", match_args.bin_ls,
                          "Hough log-scale bin size (default sigma_ls/2)");
    add_common(match_cmd, match_args.common);

    FlowArgs flow_args;
    auto* flow_cmd = app.add_subcommand("flow", "Densify matches into a flow field");
    flow_cmd->add_option("src", flow_args.src_manifest, "Source proposal manifest")
        ->required();
    flow_cmd->add_option("dst", flow_args.dst_manifest, "Destination proposal manifest")
        ->required();
    flow_cmd->add_option("matches", flow_args.match_csv, "Match CSV")->required();
    flow_cmd->add_flag("--warp", flow_args.warp, "Also write the warped second image");
    flow_cmd->add_option("--guide", flow_args.guide_path,
                         "Guide image for edge-aware hole filling");
    add_common(flow_cmd, flow_args.common);

    GtgenArgs gtgen_args;
    auto* gtgen_cmd =
        app.add_subcommand("gtgen", "Generate TPS ground-truth region correspondences");
    gtgen_cmd->add_option("keypoints", gtgen_args.keypoints_path, "Keypoint JSON")
        ->required();
    gtgen_cmd->add_option("src", gtgen_args.src_manifest, "Source proposal manifest")
        ->required();
    gtgen_cmd->add_option("--lambda", gtgen_args.lambda, "TPS regularization (default 0)");
    gtgen_cmd->add_flag("--filter-dst-bbox", gtgen_args.filter_dst_bbox,
                        "Also require ground-truth boxes to lie 75% inside dst_bbox");
    add_common(gtgen_cmd, gtgen_args.common);

    EvalCurveArgs pcr_args;
    auto* pcr_cmd = app.add_subcommand("eval-pcr", "Probability-of-correct-region curve");
    pcr_cmd->add_option("matches", pcr_args.match_csv, "Match CSV")->required();
    pcr_cmd->add_option("dst", pcr_args.dst_manifest, "Destination proposal manifest")
        ->required();
    pcr_cmd->add_option("gt", pcr_args.gt_csv, "Ground-truth CSV")->required();
    pcr_cmd->add_option("--iou-thresh", pcr_args.iou_thresh,
                        "IoU threshold for the correct-match count (default 0.5)");
    add_common(pcr_cmd, pcr_args.common);

    EvalCurveArgs miou_args;
    auto* miou_cmd = app.add_subcommand("eval-miou", "Mean IoU of top-k matches");
    miou_cmd->add_option("matches", miou_args.match_csv, "Match CSV")->required();
    miou_cmd->add_option("dst", miou_args.dst_manifest, "Destination proposal manifest")
        ->required();
    miou_cmd->add_option("gt", miou_args.gt_csv, "Ground-truth CSV")->required();
    add_common(miou_cmd, miou_args.common);

    PckArgs pck_args;
    auto* pck_cmd = app.add_subcommand("eval-pck", "PCK of a dense flow field");
    pck_cmd->add_option("flow", pck_args.flow_path, "Flow .flo file")->required();
    pck_cmd->add_option("keypoints", pck_args.keypoints_path, "Keypoint JSON")
        ->required();
    pck_cmd->add_option("--alpha", pck_args.alpha, "PCK threshold factor");
    pck_cmd->add_option("--bbox", pck_args.bbox_source,
                        "Object box scaling the threshold: dst (default) or src");
    add_common(pck_cmd, pck_args.common, /*with_max_proposals=*/false);

    LeaveNOutArgs lno_args;
    auto* lno_cmd =
        app.add_subcommand("leave-n-out", "Ground-truth quality audit via TPS re-fits");
    lno_cmd->add_option("keypoints", lno_args.keypoints_path, "Keypoint JSON")
        ->required();
    lno_cmd->add_option("--n", lno_args.n, "Keypoints to hold out per trial")->required();
    lno_cmd->add_option("--trials", lno_args.trials, "Number of trials");
    lno_cmd->add_option("--alpha", lno_args.alpha, "PCK threshold factor");
    add_common(lno_cmd, lno_args.common, /*with_max_proposals=*/false);

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic fixture pair");
    synth_cmd->add_option("--width", synth_args.cfg.image_width, "Image width");
    synth_cmd->add_option("--height", synth_args.cfg.image_height, "Image height");
    synth_cmd->add_option("--objects", synth_args.cfg.n_objects, "Number of objects");
    synth_cmd->add_option("--proposals-per-object", synth_args.cfg.proposals_per_object,
                          "Proposals per object");
    synth_cmd->add_option("--clutter", synth_args.cfg.n_clutter,
                          "Clutter proposals per image");
    synth_cmd->add_option("--feature-dim", synth_args.cfg.feature_dim, "Feature length");
    synth_cmd->add_option("--feature-noise", synth_args.cfg.feature_noise_sigma,
                          "Feature noise sigma");
    synth_cmd->add_option("--trans-jitter", synth_args.cfg.trans_jitter_sigma,
                          "Destination box center jitter, px");
    synth_cmd->add_option("--logscale-jitter", synth_args.cfg.logscale_jitter_sigma,
                          "Destination box log-scale jitter");
    synth_cmd->add_option("--transform", synth_args.transform,
                          "Global affine a,b,c,d,e,f (default identity)")
        ->delimiter(',');
    add_common(synth_cmd, synth_args.common, /*with_max_proposals=*/false);

    SlidingArgs sw_args;
    auto* sw_cmd =
        app.add_subcommand("sliding-windows", "Regular-grid baseline proposal boxes");
    sw_cmd->add_option("--width", sw_args.width, "Image width")->required();
    sw_cmd->add_option("--height", sw_args.height, "Image height")->required();
    sw_cmd->add_option("--scales", sw_args.scales, "Box side scales, px")->delimiter(',');
    sw_cmd->add_option("--aspects", sw_args.aspects, "Aspect ratios w/h")->delimiter(',');
    sw_cmd->add_option("--stride-frac", sw_args.stride_frac,
                       "Stride as a fraction of the box extent");
    sw_cmd->add_option("--image", sw_args.image_path, "Image path for the manifest");
    sw_cmd->add_option("--descriptor-id", sw_args.descriptor_id,
                       "Descriptor id to record in the manifest");
    add_common(sw_cmd, sw_args.common, /*with_max_proposals=*/false);

    try {
        app.parse(argc, argv);
        if (match_cmd->parsed()) return cmd_match(match_args);
        if (flow_cmd->parsed()) return cmd_flow(flow_args);
        if (gtgen_cmd->parsed()) return cmd_gtgen(gtgen_args);
        if (pcr_cmd->parsed()) return cmd_eval_pcr(pcr_args);
        if (miou_cmd->parsed()) return cmd_eval_miou(miou_args);
        if (pck_cmd->parsed()) return cmd_eval_pck(pck_args);
        if (lno_cmd->parsed()) return cmd_leave_n_out(lno_args);
        if (synth_cmd->parsed()) return cmd_synth(synth_args);
        if (sw_cmd->parsed()) return cmd_sliding_windows(sw_args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: Internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
