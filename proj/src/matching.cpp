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

#include "propflow/matching.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "propflow/parallel.hpp"
#include "propflow/text.hpp"

namespace propflow {

namespace {

void require_nonempty(const ProposalSet& source, const ProposalSet& dest) {
    if (source.regions.empty() || dest.regions.empty())
        fail("EmptyProposalSet", "matching needs nonempty proposal sets");
}

} // namespace

Eigen::MatrixXd appearance_table(const ProposalSet& source, const ProposalSet& dest,
                                 const SimilarityFn& sim) {
    const auto n = static_cast<Eigen::Index>(source.size());
    const auto m = static_cast<Eigen::Index>(dest.size());
    Eigen::MatrixXd table(n, m);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        for (Eigen::Index j = 0; j < m; ++j)
            table(static_cast<Eigen::Index>(i), j) =
                sim.apply(source.regions[i].feature, dest.regions[j].feature);
    });
    return table;
}

MatchSet argmax_matches(const Eigen::MatrixXd& scores) {
    MatchSet out;
    out.entries.reserve(static_cast<std::size_t>(scores.rows()));
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < scores.cols(); ++j)
            if (scores(i, j) > scores(i, best)) best = j;
        out.entries.push_back({static_cast<uint32_t>(i), static_cast<uint32_t>(best),
                               scores(i, best)});
    }
    return out;
}

MatchSet match_nam(const ProposalSet& source, const ProposalSet& dest,
                   const SimilarityFn& sim) {
    require_nonempty(source, dest);
    return argmax_matches(appearance_table(source, dest, sim));
}

Eigen::MatrixXd hough_exact(const ProposalSet& source, const ProposalSet& dest,
                            const Eigen::MatrixXd& table, const KernelParams& kernel) {
    const std::size_t n = source.size();
    const std::size_t m = dest.size();

    std::vector<OffsetVector> offsets(n * m);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < m; ++b)
            offsets[a * m + b] = offset(source.regions[a].box, dest.regions[b].box);

    Eigen::MatrixXd geo(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    parallel_for(n * m, [&](std::size_t q) {
        const OffsetVector& at = offsets[q];
        double sum = 0.0;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < m; ++b)
                sum += table(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) *
                       offset_kernel(at, offsets[a * m + b], kernel);
        geo(static_cast<Eigen::Index>(q / m), static_cast<Eigen::Index>(q % m)) = sum;
    });
    return geo;
}

namespace {

// Dense 3-D accumulator over offset space.
struct OffsetGrid {
    double origin[3];
    double bin[3];
    std::size_t dims[3];
    std::vector<double> cells;

    std::size_t index(std::size_t ix, std::size_t iy, std::size_t iz) const {
        return (iz * dims[1] + iy) * dims[0] + ix;
    }
};

// Smoothing taps: a Gaussian sampled at bin-center distances,
// unnormalized, so the smoothed histogram approximates the continuous
// vote sum of hough_exact. The splat and read tents each add bin^2/6 of
// variance per axis, so the taps are narrowed to compensate; the
// composite then matches the target kernel to fourth order in bin/sigma.
std::vector<double> kernel_taps(double bin, double sigma, int radius) {
    const double compensated2 =
        std::max(sigma * sigma - bin * bin / 3.0, 0.25 * sigma * sigma);
    std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
    for (int d = -radius; d <= radius; ++d) {
        const double u2 = d * bin * d * bin / compensated2;
        taps[static_cast<std::size_t>(d + radius)] = std::exp(-0.5 * u2);
    }
    return taps;
}

void convolve_axis(OffsetGrid& grid, int axis, const std::vector<double>& taps) {
    const int radius = (static_cast<int>(taps.size()) - 1) / 2;
    std::vector<double> out(grid.cells.size(), 0.0);
    const std::size_t nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
    parallel_for(nz, [&](std::size_t iz) {
        for (std::size_t iy = 0; iy < ny; ++iy) {
            for (std::size_t ix = 0; ix < nx; ++ix) {
                double sum = 0.0;
                for (int d = -radius; d <= radius; ++d) {
                    long sx = static_cast<long>(ix), sy = static_cast<long>(iy),
                         sz = static_cast<long>(iz);
                    if (axis == 0) sx += d;
                    else if (axis == 1) sy += d;
                    else sz += d;
                    if (sx < 0 || sy < 0 || sz < 0 || sx >= static_cast<long>(nx) ||
                        sy >= static_cast<long>(ny) || sz >= static_cast<long>(nz))
                        continue;
                    sum += taps[static_cast<std::size_t>(d + radius)] *
                           grid.cells[grid.index(static_cast<std::size_t>(sx),
                                                 static_cast<std::size_t>(sy),
                                                 static_cast<std::size_t>(sz))];
                }
                out[grid.index(ix, iy, iz)] = sum;
            }
        }
    });
    grid.cells.swap(out);
}

double trilinear(const OffsetGrid& grid, const OffsetVector& at) {
    // Cell centers sit at origin + (i + 0.5) * bin.
    double c[3] = {(at.dx - grid.origin[0]) / grid.bin[0] - 0.5,
                   (at.dy - grid.origin[1]) / grid.bin[1] - 0.5,
                   (at.dls - grid.origin[2]) / grid.bin[2] - 0.5};
    std::size_t lo[3];
    double f[3];
    for (int k = 0; k < 3; ++k) {
        if (grid.dims[k] == 1) {
            lo[k] = 0;
            f[k] = 0.0;
            continue;
        }
        const double clamped =
            std::clamp(c[k], 0.0, static_cast<double>(grid.dims[k] - 1));
        lo[k] = std::min(static_cast<std::size_t>(clamped), grid.dims[k] - 2);
        f[k] = clamped - static_cast<double>(lo[k]);
    }
    double result = 0.0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                const double wgt = (dx ? f[0] : 1.0 - f[0]) * (dy ? f[1] : 1.0 - f[1]) *
                                   (dz ? f[2] : 1.0 - f[2]);
                if (wgt == 0.0) continue;
                const std::size_t ix = std::min(lo[0] + static_cast<std::size_t>(dx), grid.dims[0] - 1);
                const std::size_t iy = std::min(lo[1] + static_cast<std::size_t>(dy), grid.dims[1] - 1);
                const std::size_t iz = std::min(lo[2] + static_cast<std::size_t>(dz), grid.dims[2] - 1);
                result += wgt * grid.cells[grid.index(ix, iy, iz)];
            }
    return result;
}

} // namespace

Eigen::MatrixXd hough_binned(const ProposalSet& source, const ProposalSet& dest,
                             const Eigen::MatrixXd& table, const PhmConfig& cfg) {
    const std::size_t n = source.size();
    const std::size_t m = dest.size();
    const double bin_xy = cfg.effective_bin_xy();
    const double bin_ls = cfg.effective_bin_ls();

    std::vector<OffsetVector> offsets(n * m);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < m; ++b)
            offsets[a * m + b] = offset(source.regions[a].box, dest.regions[b].box);

    double lo[3] = {offsets[0].dx, offsets[0].dy, offsets[0].dls};
    double hi[3] = {offsets[0].dx, offsets[0].dy, offsets[0].dls};
    for (const auto& o : offsets) {
        lo[0] = std::min(lo[0], o.dx); hi[0] = std::max(hi[0], o.dx);
        lo[1] = std::min(lo[1], o.dy); hi[1] = std::max(hi[1], o.dy);
        lo[2] = std::min(lo[2], o.dls); hi[2] = std::max(hi[2], o.dls);
    }

    const int radius_xy = static_cast<int>(std::ceil(3.0 * cfg.kernel.sigma_xy / bin_xy));
    const int radius_ls = static_cast<int>(std::ceil(3.0 * cfg.kernel.sigma_ls / bin_ls));

    OffsetGrid grid;
    grid.bin[0] = grid.bin[1] = bin_xy;
    grid.bin[2] = bin_ls;
    const int pad[3] = {radius_xy + 1, radius_xy + 1, radius_ls + 1};
    for (int k = 0; k < 3; ++k) {
        grid.origin[k] = lo[k] - pad[k] * grid.bin[k];
        grid.dims[k] = static_cast<std::size_t>(
                           std::floor((hi[k] - grid.origin[k]) / grid.bin[k])) +
                       static_cast<std::size_t>(pad[k]) + 2;
    }
    const std::size_t total_cells = grid.dims[0] * grid.dims[1] * grid.dims[2];
    if (total_cells > (std::size_t{1} << 27))
        fail("ConfigError", "Hough accumulator would need " +
                                std::to_string(total_cells) +
                                " cells; increase the bin sizes");
    grid.cells.assign(total_cells, 0.0);

    // Votes are splatted trilinearly over the eight surrounding cells;
    // hard binning would carry first-order quantization error that can
    // flip near-tie argmaxes. Accumulation stays sequential in a fixed
    // (a, b) order so the histogram is independent of thread count.
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < m; ++b) {
            const OffsetVector& o = offsets[a * m + b];
            const double c[3] = {(o.dx - grid.origin[0]) / grid.bin[0] - 0.5,
                                 (o.dy - grid.origin[1]) / grid.bin[1] - 0.5,
                                 (o.dls - grid.origin[2]) / grid.bin[2] - 0.5};
            std::size_t lo_cell[3];
            double frac[3];
            for (int k = 0; k < 3; ++k) {
                const double base = std::floor(c[k]);
                lo_cell[k] = static_cast<std::size_t>(base);
                frac[k] = c[k] - base;
            }
            const double w =
                table(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
            for (int dz = 0; dz < 2; ++dz)
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const double wgt = (dx ? frac[0] : 1.0 - frac[0]) *
                                           (dy ? frac[1] : 1.0 - frac[1]) *
                                           (dz ? frac[2] : 1.0 - frac[2]);
                        grid.cells[grid.index(lo_cell[0] + static_cast<std::size_t>(dx),
                                              lo_cell[1] + static_cast<std::size_t>(dy),
                                              lo_cell[2] + static_cast<std::size_t>(dz))] +=
                            w * wgt;
                    }
        }
    }

    convolve_axis(grid, 0, kernel_taps(bin_xy, cfg.kernel.sigma_xy, radius_xy));
    convolve_axis(grid, 1, kernel_taps(bin_xy, cfg.kernel.sigma_xy, radius_xy));
    convolve_axis(grid, 2, kernel_taps(bin_ls, cfg.kernel.sigma_ls, radius_ls));

    Eigen::MatrixXd geo(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    parallel_for(n * m, [&](std::size_t q) {
        geo(static_cast<Eigen::Index>(q / m), static_cast<Eigen::Index>(q % m)) =
            trilinear(grid, offsets[q]);
    });
    return geo;
}

MatchSet match_phm(const ProposalSet& source, const ProposalSet& dest,
                   const SimilarityFn& sim, const PhmConfig& cfg) {
    require_nonempty(source, dest);
    const Eigen::MatrixXd table = appearance_table(source, dest, sim);
    const Eigen::MatrixXd geo = cfg.mode == PhmConfig::Mode::exact
                                    ? hough_exact(source, dest, table, cfg.kernel)
                                    : hough_binned(source, dest, table, cfg);
    return argmax_matches(table.cwiseProduct(geo));
}

NeighborGraph neighbor_graph(const ProposalSet& set) {
    if (set.regions.empty()) fail("EmptyProposalSet", "neighbor_graph needs regions");
    const std::size_t n = set.size();
    NeighborGraph g;
    g.adjacency.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
        g.adjacency[i].push_back(static_cast<uint32_t>(i));
        for (std::size_t j = i + 1; j < n; ++j) {
            if (intersection_area(set.regions[i].box, set.regions[j].box) > 0.0) {
                g.adjacency[i].push_back(static_cast<uint32_t>(j));
                g.adjacency[j].push_back(static_cast<uint32_t>(i));
            }
        }
    }
    for (auto& adj : g.adjacency) std::sort(adj.begin(), adj.end());
    return g;
}

OffsetVector geometric_median(std::span<const OffsetVector> points, double tol,
                              uint32_t max_iter) {
    if (points.empty()) fail("EmptyInput", "geometric_median of zero points");
    if (points.size() == 1) return points[0];

    double x[3] = {0.0, 0.0, 0.0};
    for (const auto& p : points) {
        x[0] += p.dx;
        x[1] += p.dy;
        x[2] += p.dls;
    }
    for (double& c : x) c /= static_cast<double>(points.size());

    constexpr double coincide = 1e-9;
    for (uint32_t iter = 0; iter < max_iter; ++iter) {
        double num[3] = {0.0, 0.0, 0.0};
        double denom = 0.0;
        double grad[3] = {0.0, 0.0, 0.0}; // negative gradient over non-coincident points
        double multiplicity = 0.0;
        for (const auto& p : points) {
            const double d0 = p.dx - x[0];
            const double d1 = p.dy - x[1];
            const double d2 = p.dls - x[2];
            const double dist = std::sqrt(d0 * d0 + d1 * d1 + d2 * d2);
            if (dist < coincide) {
                multiplicity += 1.0;
                continue;
            }
            const double w = 1.0 / dist;
            num[0] += p.dx * w;
            num[1] += p.dy * w;
            num[2] += p.dls * w;
            denom += w;
            grad[0] += d0 * w;
            grad[1] += d1 * w;
            grad[2] += d2 * w;
        }
        if (denom == 0.0) break; // all points coincide with the iterate

        double next[3] = {num[0] / denom, num[1] / denom, num[2] / denom};
        if (multiplicity > 0.0) {
            // Vardi-Zhang step at a data point: if the pull of the other
            // points does not exceed the local multiplicity, x is the median.
            const double r = std::sqrt(grad[0] * grad[0] + grad[1] * grad[1] +
                                       grad[2] * grad[2]);
            if (r <= multiplicity) break;
            const double blend = multiplicity / r;
            for (int k = 0; k < 3; ++k)
                next[k] = (1.0 - blend) * next[k] + blend * x[k];
        }

        const double step = std::sqrt((next[0] - x[0]) * (next[0] - x[0]) +
                                      (next[1] - x[1]) * (next[1] - x[1]) +
                                      (next[2] - x[2]) * (next[2] - x[2]));
        x[0] = next[0];
        x[1] = next[1];
        x[2] = next[2];
        if (step < tol) break;
    }
    return {x[0], x[1], x[2]};
}

MatchSet match_lom(const ProposalSet& source, const ProposalSet& dest,
                   const SimilarityFn& sim, const LomConfig& cfg, LomDetail* detail) {
    require_nonempty(source, dest);
    const std::size_t n = source.size();
    const std::size_t m = dest.size();

    const Eigen::MatrixXd table = appearance_table(source, dest, sim);
    const MatchSet psi = argmax_matches(table); // initial appearance-only assignment
    const NeighborGraph graph = neighbor_graph(source);

    // Offset of every region under psi, pre-scaled so the median treats
    // pixel and log-scale axes comparably; scaled back afterwards.
    const double sx = 1.0 / cfg.kernel.sigma_xy;
    const double sl = 1.0 / cfg.kernel.sigma_ls;
    std::vector<OffsetVector> psi_offsets(n);
    for (std::size_t r = 0; r < n; ++r) {
        const OffsetVector o =
            offset(source.regions[r].box, dest.regions[psi.entries[r].dst_id].box);
        psi_offsets[r] = {o.dx * sx, o.dy * sx, o.dls * sl};
    }

    if (detail) {
        detail->local_offsets.assign(n, {});
        detail->neighborhood_fidelity.assign(n, 0.0);
    }

    Eigen::MatrixXd scores(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    parallel_for(n, [&](std::size_t r) {
        const auto& neigh = graph.adjacency[r];
        std::vector<OffsetVector> local(neigh.size());
        double fidelity = 0.0;
        for (std::size_t k = 0; k < neigh.size(); ++k) {
            local[k] = psi_offsets[neigh[k]];
            fidelity += table(static_cast<Eigen::Index>(neigh[k]),
                              static_cast<Eigen::Index>(psi.entries[neigh[k]].dst_id));
        }
        const OffsetVector med =
            geometric_median(local, cfg.median_tol, cfg.median_max_iter);
        const OffsetVector star{med.dx / sx, med.dy / sx, med.dls / sl};
        if (detail) {
            detail->local_offsets[r] = star;
            detail->neighborhood_fidelity[r] = fidelity;
        }
        for (std::size_t j = 0; j < m; ++j) {
            const OffsetVector o = offset(source.regions[r].box, dest.regions[j].box);
            const double g = offset_kernel(o, star, cfg.kernel) * fidelity;
            scores(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
                table(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) * g;
        }
    });
    return argmax_matches(scores);
}

void write_match_csv(const std::string& path, const MatchSet& matches) {
    std::ofstream out(path);
    if (!out) fail("IoError", "cannot write '" + path + "'");
    out << "src_id,dst_id,score\n";
    for (const auto& e : matches.entries)
        out << e.src_id << "," << e.dst_id << "," << format_double(e.score) << "\n";
    if (!out) fail("IoError", "short write to '" + path + "'");
}

MatchSet read_match_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "src_id,dst_id,score")
        fail("FormatError", path + ": expected header 'src_id,dst_id,score'");
    MatchSet out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        const std::string ctx = path + ":" + std::to_string(lineno);
        if (fields.size() != 3) fail("FormatError", ctx + ": expected 3 fields");
        MatchEntry e;
        e.src_id = static_cast<uint32_t>(parse_long(fields[0], ctx));
        e.dst_id = static_cast<uint32_t>(parse_long(fields[1], ctx));
        e.score = parse_double(fields[2], ctx);
        out.entries.push_back(e);
    }
    return out;
}

} // namespace propflow
