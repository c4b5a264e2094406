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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "propflow/flowfield.hpp"
#include "propflow/matching.hpp"
#include "propflow/tps.hpp"

namespace propflow {

// A sampled metric curve; x is the threshold (PCR) or rank k (mIoU@k).
struct Curve {
    std::vector<double> x;
    std::vector<double> y;
};

// 101 uniform samples of tau in (0, 1]: (i+1)/101 for i = 0..100.
std::vector<double> default_tau_grid();

// Probability of correct region: value(tau) = fraction of ground-truthed
// regions whose match has 1 - IoU(match box, gt box) < tau.
Curve pcr(const MatchSet& matches, const ProposalSet& dest,
          std::span<const GtCorrespondence> gts, std::span<const double> taus);

// Mean IoU of the k best matches by score (score ties rank by src_id);
// x runs over k = 1..|gts|.
Curve miou_at_k(const MatchSet& matches, const ProposalSet& dest,
                std::span<const GtCorrespondence> gts);

// Trapezoidal area under the curve normalized by the domain length; a
// single-point curve evaluates to its value.
double auc(const Curve& curve);

struct PckResult {
    double alpha = 0.1;
    uint32_t correct = 0;
    uint32_t total = 0;
    double pck() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
};

// Percentage of correct keypoints for a dense flow: the prediction
// k + flow(k) (bilinear flow sampling) is correct iff its distance to the
// annotated destination is strictly below alpha * max(h, w) of dst_bbox.
PckResult pck_flow(const FlowField& flow, std::span<const KeypointPair> pairs,
                   const Box& dst_bbox, double alpha);

// Leave-n-out ground-truth audit: per trial, n randomly held-out pairs
// are predicted by a TPS fitted on the rest and scored as PCK; returns
// the mean over trials. Uses the project's seeded RNG. When dst_bbox is
// absent, the threshold uses the tight bounds of all destination
// keypoints.
double leave_n_out(std::span<const KeypointPair> pairs, uint32_t n, uint32_t trials,
                   double alpha, uint64_t seed,
                   const std::optional<Box>& dst_bbox = std::nullopt);

// Curve CSV ("tau,value" or "k,value") and a minimal self-contained SVG
// line plot.
void write_curve_csv(const std::string& path, const Curve& curve,
                     const std::string& x_name);
Curve read_curve_csv(const std::string& path);
void write_curve_svg(const std::string& path, const Curve& curve,
                     const std::string& title);

} // namespace propflow
