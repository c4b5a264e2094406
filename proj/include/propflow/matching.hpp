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
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "propflow/geometry.hpp"
#include "propflow/proposals.hpp"

namespace propflow {

// Region matching: every source proposal is assigned its best destination
// proposal under p(r -> r') = p(f -> f') * p(s -> s' | D). The three
// strategies differ only in the geometric consistency term:
//   NAM - uniform (appearance only)
//   PHM - global Hough voting over the 3-D offset space
//   LOM - per-region local offset from the geometric median of the
//         neighborhood's appearance-based offsets

struct MatchEntry {
    uint32_t src_id = 0;
    uint32_t dst_id = 0;
    double score = 0.0;
};

// Exactly one entry per source region, ordered by src_id.
struct MatchSet {
    std::vector<MatchEntry> entries;
};

// table(i, j) = similarity of source feature i and destination feature j.
Eigen::MatrixXd appearance_table(const ProposalSet& source, const ProposalSet& dest,
                                 const SimilarityFn& sim);

// Per-row argmax of a score table; ties break toward the lowest column.
MatchSet argmax_matches(const Eigen::MatrixXd& scores);

MatchSet match_nam(const ProposalSet& source, const ProposalSet& dest,
                   const SimilarityFn& sim);

// Exact Hough geometric term: geo(i, j) accumulates every pair's
// appearance-weighted kernel vote at offset(i, j). O(n^2 m^2); kept as
// the reference evaluator and for small inputs.
Eigen::MatrixXd hough_exact(const ProposalSet& source, const ProposalSet& dest,
                            const Eigen::MatrixXd& table, const KernelParams& kernel);

struct PhmConfig {
    enum class Mode { exact, binned };
    Mode mode = Mode::binned;
    KernelParams kernel;
    double bin_xy = 0.0; // <= 0 picks the default sigma_xy / 2
    double bin_ls = 0.0; // <= 0 picks the default sigma_ls / 2

    double effective_bin_xy() const { return bin_xy > 0.0 ? bin_xy : kernel.sigma_xy / 2.0; }
    double effective_bin_ls() const { return bin_ls > 0.0 ? bin_ls : kernel.sigma_ls / 2.0; }
};

// Binned Hough geometric term: votes land in a 3-D histogram over
// (dx, dy, dls), the histogram is smoothed with the offset kernel
// (truncated at 3 sigma), and geo(i, j) is read back by trilinear
// interpolation at the pair's offset.
Eigen::MatrixXd hough_binned(const ProposalSet& source, const ProposalSet& dest,
                             const Eigen::MatrixXd& table, const PhmConfig& cfg);

MatchSet match_phm(const ProposalSet& source, const ProposalSet& dest,
                   const SimilarityFn& sim, const PhmConfig& cfg);

// adjacency[r] = ids of regions whose boxes overlap r's with positive
// area; always contains r itself, and is symmetric.
struct NeighborGraph {
    std::vector<std::vector<uint32_t>> adjacency;
};

NeighborGraph neighbor_graph(const ProposalSet& set);

// Point minimizing the sum of Euclidean distances, by Weiszfeld
// iteration from the coordinatewise mean. Iterates landing on a data
// point take the Vardi-Zhang modified step, which also detects the
// point being the median itself. The cap is generous: the iteration is
// linear and ill-conditioned instances need a few thousand steps to
// push the objective gap below 1e-6.
OffsetVector geometric_median(std::span<const OffsetVector> points, double tol = 1e-8,
                              uint32_t max_iter = 2000);

struct LomConfig {
    KernelParams kernel;
    double median_tol = 1e-8;
    uint32_t median_max_iter = 2000;
};

// Optional byproducts of match_lom, used by diagnostics and tests.
struct LomDetail {
    std::vector<OffsetVector> local_offsets;   // x*_r per source region
    std::vector<double> neighborhood_fidelity; // sum of N(r)'s appearance scores
};

MatchSet match_lom(const ProposalSet& source, const ProposalSet& dest,
                   const SimilarityFn& sim, const LomConfig& cfg,
                   LomDetail* detail = nullptr);

// Match CSV: header "src_id,dst_id,score", one row per source region,
// floats in shortest round-trip form.
void write_match_csv(const std::string& path, const MatchSet& matches);
MatchSet read_match_csv(const std::string& path);

} // namespace propflow
