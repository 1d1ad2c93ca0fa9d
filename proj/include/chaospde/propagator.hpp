#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "chaospde/chaos.hpp"
#include "chaospde/common.hpp"
#include "chaospde/multi_index.hpp"
#include "chaospde/noise.hpp"
#include "chaospde/spectral.hpp"
#include "chaospde/time_grid.hpp"

namespace chaospde {

// The evolution system: generator A, noise couplings B_l, driving noises X_l.
struct SystemOperators {
    SpectralGenerator generator;
    std::vector<CouplingOperator> couplings;
    std::vector<NoiseSpec> noises;

    bool all_diagonal() const {
        for (const auto& b : couplings)
            if (!b.is_diagonal()) return false;
        return true;
    }
};

// Deterministic forcing, constant in time. `drift` feeds the mean equation,
// `noise_offsets` the first-level equations.
struct ForcingTerms {
    std::optional<SpectralField> drift;
    std::vector<SpectralField> noise_offsets;

    bool empty() const { return !drift.has_value() && noise_offsets.empty(); }
};

struct SolveOptions {
    int threads = 1;
    bool keep_trajectory = false;
    std::vector<std::size_t> snapshot_nodes;
    bool record_alpha_norms = true;
    bool force_dense = false;
    std::uint64_t field_scalar_limit = 300000000ULL;
    // Bucket edges for the energy histogram: order bucket i covers
    // order <= order_breaks[i] (beyond the last break = final bucket).
    std::vector<int> order_breaks;
    std::vector<int> dim_breaks;
};

// Squared H-norm summary of one chaos coefficient trajectory.
struct AlphaNorm {
    int length = 0;
    int order = 0;
    int dimension = 0;
    double sup_sq = 0.0;  // max over grid nodes
    double end_sq = 0.0;  // at t = T
};

// All chaos coefficients at one time.
struct ChaosCoefficients {
    double t = 0.0;
    std::shared_ptr<const TruncationSet> truncation;
    std::vector<SpectralField> fields;  // parallel to truncation->members

    std::size_t size() const { return fields.size(); }
};

// All chaos coefficients at every grid node.
struct ChaosTrajectory {
    TimeGrid grid{1.0, 2};
    std::shared_ptr<const TruncationSet> truncation;
    std::vector<std::vector<SpectralField>> fields;  // [alpha][node]

    ChaosCoefficients at_node(std::size_t node) const {
        ChaosCoefficients out;
        out.t = grid.node(node);
        out.truncation = truncation;
        out.fields.reserve(fields.size());
        for (const auto& traj : fields) out.fields.push_back(traj[node]);
        return out;
    }
};

struct SolveResult {
    TimeGrid grid{1.0, 2};
    std::shared_ptr<const TruncationSet> truncation;
    std::vector<std::vector<double>> level_energy;  // [level][node]
    // energy split by (level, order bucket, dimension bucket) per node;
    // index = (level * n_order_buckets + ob) * n_dim_buckets + db
    std::vector<std::vector<double>> energy_hist;
    std::vector<int> order_breaks;
    std::vector<int> dim_breaks;
    std::vector<AlphaNorm> alpha_norms;        // parallel to members (may be empty)
    std::vector<ChaosCoefficients> snapshots;  // at SolveOptions::snapshot_nodes
    std::optional<ChaosTrajectory> trajectory;
    bool scalar_path = false;

    double second_moment_at(std::size_t node) const {
        double acc = 0.0;
        for (const auto& level : level_energy) acc += level[node];
        return acc;
    }

    std::size_t order_bucket(int order) const {
        std::size_t i = 0;
        while (i < order_breaks.size() && order > order_breaks[i]) ++i;
        return i;
    }
    std::size_t dim_bucket(int dim) const {
        std::size_t i = 0;
        while (i < dim_breaks.size() && dim > dim_breaks[i]) ++i;
        return i;
    }
    std::size_t hist_index(int level, std::size_t ob, std::size_t db) const {
        std::size_t nob = order_breaks.size() + 1;
        std::size_t ndb = dim_breaks.size() + 1;
        return (static_cast<std::size_t>(level) * nob + ob) * ndb + db;
    }
};

namespace detail {

inline void validate_system(const SystemOperators& ops, const TruncationSet& trunc, const TimeGrid& grid) {
    if (static_cast<int>(ops.couplings.size()) < trunc.max_dimension)
        throw std::invalid_argument("solve_propagator: fewer couplings than the truncation dimension");
    if (static_cast<int>(ops.noises.size()) < trunc.max_dimension)
        throw std::invalid_argument("solve_propagator: fewer noises than the truncation dimension");
    for (const auto& noise : ops.noises)
        if (noise.T != grid.horizon())
            throw std::invalid_argument("solve_propagator: noise horizon does not match the grid");
}

inline std::vector<std::size_t> level_offsets(const TruncationSet& trunc) {
    std::vector<std::size_t> offsets(static_cast<std::size_t>(trunc.max_length) + 2, trunc.members.size());
    int current = -1;
    for (std::size_t i = 0; i < trunc.members.size(); ++i) {
        int len = trunc.members[i].length();
        while (current < len) offsets[static_cast<std::size_t>(++current)] = i;
    }
    return offsets;  // level k occupies [offsets[k], offsets[k+1])
}

struct ModeWeights {
    std::vector<double> decay;  // e^{a(q) h}
    std::vector<double> wl;     // h * g0(a(q) h)
    std::vector<double> wr;     // h * g1(a(q) h)
};

inline ModeWeights mode_weights(const SpectralGenerator& gen, int cutoff, double h) {
    ModeWeights w;
    std::size_t dim = static_cast<std::size_t>(2 * cutoff + 1);
    w.decay.resize(dim);
    w.wl.resize(dim);
    w.wr.resize(dim);
    for (int q = -cutoff; q <= cutoff; ++q) {
        double z = gen.symbol(q) * h;
        double g0, g1;
        exp_integrator_weights(z, g0, g1);
        std::size_t idx = static_cast<std::size_t>(q + cutoff);
        w.decay[idx] = std::exp(z);
        w.wl[idx] = h * g0;
        w.wr[idx] = h * g1;
    }
    return w;
}

}  // namespace detail

// Solves the propagator system of the chaos coefficients on the grid:
//   u_(0)(t)   = Phi_t u0 (+ Duhamel term of the drift forcing),
//   u_alpha(t) = sum_{(k,l) in supp} sqrt(alpha_{kl})
//                  int_0^t Phi_{t-s} [B_l u_{alpha-eps_{kl}}(s) (+ G_l)] (K_l m_k)(s) ds.
// Levels are processed in order of |alpha|; the semigroup factor is exact per
// mode and the remaining integrand is interpolated linearly between nodes.
//
// When every coupling is diagonal and no forcing is present, coefficients
// factor as c_alpha(t) * Phi_t u0 with scalar trajectories c_alpha (the
// semigroup factors cancel exactly); the solver then runs on scalars and
// reconstructs fields where asked. Within a level, coefficients are
// independent; work is split over fixed blocks and partial energies are
// combined in block order, so results are bit-identical for any thread count.
inline SolveResult solve_propagator_detailed(const SystemOperators& ops, const SpectralField& u0,
                                             const TruncationSet& trunc, const TimeGrid& grid,
                                             const ForcingTerms& forcing = {}, const SolveOptions& opts = {}) {
    detail::validate_system(ops, trunc, grid);
    const std::size_t nodes = grid.nodes();
    const std::size_t count = trunc.members.size();
    const int cutoff = u0.cutoff();
    const double h = grid.step();

    SolveResult result;
    result.grid = grid;
    result.truncation = std::make_shared<TruncationSet>(trunc);
    result.order_breaks = opts.order_breaks;
    result.dim_breaks = opts.dim_breaks;
    result.level_energy.assign(static_cast<std::size_t>(trunc.max_length) + 1, std::vector<double>(nodes, 0.0));
    const std::size_t nob = opts.order_breaks.size() + 1;
    const std::size_t ndb = opts.dim_breaks.size() + 1;
    const std::size_t hist_cells = nob * ndb;
    result.energy_hist.assign(static_cast<std::size_t>(trunc.max_length + 1) * hist_cells,
                              std::vector<double>(nodes, 0.0));
    if (opts.record_alpha_norms) result.alpha_norms.resize(count);

    const bool scalar_path = ops.all_diagonal() && forcing.empty() && !opts.force_dense;
    result.scalar_path = scalar_path;

    if (opts.keep_trajectory) {
        std::uint64_t scalars = static_cast<std::uint64_t>(count) * nodes * static_cast<std::uint64_t>(2 * cutoff + 1);
        if (scalars > opts.field_scalar_limit)
            throw GuardError("solve_propagator: full trajectory would exceed the field scalar limit");
        result.trajectory = ChaosTrajectory{grid, result.truncation, {}};
        result.trajectory->fields.resize(count);
    }

    std::vector<NoiseDiscretization> noise_rows;
    noise_rows.reserve(static_cast<std::size_t>(trunc.max_dimension));
    for (int l = 1; l <= trunc.max_dimension; ++l)
        noise_rows.emplace_back(ops.noises[static_cast<std::size_t>(l - 1)], grid, std::max(1, trunc.max_order));

    const auto offsets = detail::level_offsets(trunc);
    const auto weights = detail::mode_weights(ops.generator, cutoff, h);
    const std::size_t dim = static_cast<std::size_t>(2 * cutoff + 1);

    // mean trajectory u_(0)
    std::vector<SpectralField> baseline(nodes, SpectralField(cutoff));
    baseline[0] = u0;
    if (forcing.drift.has_value()) {
        const SpectralField& F = *forcing.drift;
        F.require_same_cutoff(u0);
        for (std::size_t i = 1; i < nodes; ++i) {
            SpectralField next(cutoff);
            for (std::size_t m = 0; m < dim; ++m)
                next.raw()[m] =
                    weights.decay[m] * baseline[i - 1].raw()[m] + (weights.wl[m] + weights.wr[m]) * F.raw()[m];
            baseline[i] = std::move(next);
        }
    } else {
        for (std::size_t i = 1; i < nodes; ++i) baseline[i] = semigroup_apply(ops.generator, grid.node(i), u0);
    }

    std::vector<double> baseline_sq(nodes);
    for (std::size_t i = 0; i < nodes; ++i) baseline_sq[i] = h_norm_sq(baseline[i]);
    result.level_energy[0] = baseline_sq;
    result.energy_hist[result.hist_index(0, 0, 0)] = baseline_sq;
    if (opts.record_alpha_norms && count > 0)
        result.alpha_norms[0] = AlphaNorm{0, 0, 0, *std::max_element(baseline_sq.begin(), baseline_sq.end()),
                                          baseline_sq.back()};
    if (!opts.snapshot_nodes.empty()) {
        result.snapshots.resize(opts.snapshot_nodes.size());
        for (std::size_t s = 0; s < opts.snapshot_nodes.size(); ++s) {
            result.snapshots[s].t = grid.node(opts.snapshot_nodes[s]);
            result.snapshots[s].truncation = result.truncation;
            result.snapshots[s].fields.assign(count, SpectralField(cutoff));
            result.snapshots[s].fields[0] = baseline[opts.snapshot_nodes[s]];
        }
    }
    if (result.trajectory) result.trajectory->fields[0] = baseline;

    const std::size_t block_size = scalar_path ? 2048 : 64;

    // per-level worker shared by both paths: runs fn(local index) over blocks,
    // collecting per-block histogram partials and reducing them in block order
    auto run_level = [&](int level, std::size_t level_count, auto&& per_alpha) {
        const std::size_t nblocks = (level_count + block_size - 1) / block_size;
        std::vector<std::vector<double>> block_hist(nblocks);
        parallel_for(nblocks, opts.threads, [&](std::size_t blk) {
            auto& hist = block_hist[blk];
            hist.assign(hist_cells * nodes, 0.0);
            const std::size_t lo = blk * block_size;
            const std::size_t hi = std::min(level_count, lo + block_size);
            for (std::size_t local = lo; local < hi; ++local) per_alpha(local, hist);
        });
        for (std::size_t blk = 0; blk < nblocks; ++blk) {
            for (std::size_t cell = 0; cell < hist_cells; ++cell) {
                auto& level_row = result.energy_hist[static_cast<std::size_t>(level) * hist_cells + cell];
                auto& levelsum = result.level_energy[static_cast<std::size_t>(level)];
                const double* src = block_hist[blk].data() + cell * nodes;
                for (std::size_t i = 0; i < nodes; ++i) {
                    level_row[i] += src[i];
                    levelsum[i] += src[i];
                }
            }
        }
    };

    if (scalar_path) {
        std::vector<double> prev_level;  // [local alpha][node]
        std::vector<double> cur_level;
        std::unordered_map<MultiIndex, std::uint32_t, MultiIndexHash> prev_lookup;
        std::vector<double> snap_c(opts.snapshot_nodes.empty() ? 0 : count * opts.snapshot_nodes.size(), 0.0);
        const std::vector<double> ones(nodes, 1.0);  // scalar trajectory of the zero index

        for (int level = 1; level <= trunc.max_length; ++level) {
            const std::size_t begin = offsets[static_cast<std::size_t>(level)];
            const std::size_t level_count = offsets[static_cast<std::size_t>(level) + 1] - begin;
            if (level_count == 0) break;
            const std::size_t prev_begin = offsets[static_cast<std::size_t>(level - 1)];
            const std::size_t prev_count = begin - prev_begin;

            prev_lookup.clear();
            prev_lookup.reserve(prev_count * 2);
            for (std::size_t i = 0; i < prev_count; ++i)
                prev_lookup.emplace(trunc.members[prev_begin + i], static_cast<std::uint32_t>(i));

            const bool store_level = level < trunc.max_length;
            if (store_level) cur_level.assign(level_count * nodes, 0.0);

            run_level(level, level_count, [&](std::size_t local, std::vector<double>& hist) {
                thread_local std::vector<double> integrand;
                thread_local std::vector<double> c;
                integrand.assign(nodes, 0.0);
                c.assign(nodes, 0.0);
                const MultiIndex& alpha = trunc.members[begin + local];
                for (const auto& entry : alpha.entries()) {
                    const double* cprev;
                    if (level == 1) {
                        cprev = ones.data();
                    } else {
                        auto it = prev_lookup.find(alpha.minus_unit(entry.k, entry.l));
                        cprev = prev_level.data() + static_cast<std::size_t>(it->second) * nodes;
                    }
                    const double factor = std::sqrt(static_cast<double>(entry.count)) *
                                          ops.couplings[static_cast<std::size_t>(entry.l - 1)].diagonal_factor();
                    const std::vector<double>& krow =
                        noise_rows[static_cast<std::size_t>(entry.l - 1)].filtered_row(entry.k);
                    for (std::size_t i = 0; i < nodes; ++i) integrand[i] += factor * krow[i] * cprev[i];
                }
                for (std::size_t i = 1; i < nodes; ++i)
                    c[i] = c[i - 1] + 0.5 * h * (integrand[i - 1] + integrand[i]);

                const std::size_t cell =
                    result.order_bucket(alpha.order()) * ndb + result.dim_bucket(alpha.dimension());
                double* hrow = hist.data() + cell * nodes;
                double sup_sq = 0.0;
                for (std::size_t i = 0; i < nodes; ++i) {
                    double sq = c[i] * c[i] * baseline_sq[i];
                    hrow[i] += sq;
                    sup_sq = std::max(sup_sq, sq);
                }
                const std::size_t global = begin + local;
                if (opts.record_alpha_norms)
                    result.alpha_norms[global] = AlphaNorm{level, alpha.order(), alpha.dimension(), sup_sq,
                                                           c[nodes - 1] * c[nodes - 1] * baseline_sq[nodes - 1]};
                for (std::size_t s = 0; s < opts.snapshot_nodes.size(); ++s)
                    snap_c[global * opts.snapshot_nodes.size() + s] = c[opts.snapshot_nodes[s]];
                if (store_level) std::copy(c.begin(), c.end(), cur_level.begin() + local * nodes);
                if (result.trajectory) {
                    auto& traj = result.trajectory->fields[global];
                    traj.assign(nodes, SpectralField(cutoff));
                    for (std::size_t i = 0; i < nodes; ++i) {
                        traj[i] = baseline[i];
                        traj[i] *= c[i];
                    }
                }
            });
            prev_level.swap(cur_level);
        }
        for (std::size_t s = 0; s < opts.snapshot_nodes.size(); ++s) {
            const std::size_t node = opts.snapshot_nodes[s];
            for (std::size_t a = 1; a < count; ++a) {
                SpectralField f = baseline[node];
                f *= snap_c[a * opts.snapshot_nodes.size() + s];
                result.snapshots[s].fields[a] = std::move(f);
            }
        }
    } else {
        std::vector<std::vector<SpectralField>> prev_level;
        std::vector<std::vector<SpectralField>> cur_level;
        std::unordered_map<MultiIndex, std::uint32_t, MultiIndexHash> prev_lookup;
        prev_level.push_back(baseline);

        for (int level = 1; level <= trunc.max_length; ++level) {
            const std::size_t begin = offsets[static_cast<std::size_t>(level)];
            const std::size_t level_count = offsets[static_cast<std::size_t>(level) + 1] - begin;
            if (level_count == 0) break;
            const std::size_t prev_begin = offsets[static_cast<std::size_t>(level - 1)];
            const std::size_t prev_count = begin - prev_begin;

            prev_lookup.clear();
            prev_lookup.reserve(prev_count * 2);
            for (std::size_t i = 0; i < prev_count; ++i)
                prev_lookup.emplace(trunc.members[prev_begin + i], static_cast<std::uint32_t>(i));

            std::uint64_t level_scalars =
                static_cast<std::uint64_t>(level_count) * nodes * static_cast<std::uint64_t>(2 * dim);
            if (level_scalars > opts.field_scalar_limit)
                throw GuardError("solve_propagator: level storage would exceed the field scalar limit");
            cur_level.assign(level_count, {});

            run_level(level, level_count, [&](std::size_t local, std::vector<double>& hist) {
                const MultiIndex& alpha = trunc.members[begin + local];
                std::vector<SpectralField> integrand(nodes, SpectralField(cutoff));
                for (const auto& entry : alpha.entries()) {
                    const std::vector<SpectralField>* parent_traj;
                    if (level == 1) {
                        parent_traj = &prev_level[0];
                    } else {
                        auto it = prev_lookup.find(alpha.minus_unit(entry.k, entry.l));
                        parent_traj = &prev_level[it->second];
                    }
                    const double factor = std::sqrt(static_cast<double>(entry.count));
                    const auto& coupling = ops.couplings[static_cast<std::size_t>(entry.l - 1)];
                    const std::vector<double>& krow =
                        noise_rows[static_cast<std::size_t>(entry.l - 1)].filtered_row(entry.k);
                    const SpectralField* offset = nullptr;
                    if (level == 1 && static_cast<std::size_t>(entry.l - 1) < forcing.noise_offsets.size())
                        offset = &forcing.noise_offsets[static_cast<std::size_t>(entry.l - 1)];
                    for (std::size_t i = 0; i < nodes; ++i) {
                        SpectralField term = apply_coupling(coupling, (*parent_traj)[i]);
                        if (offset) term += *offset;
                        term *= factor * krow[i];
                        integrand[i] += term;
                    }
                }
                std::vector<SpectralField> u(nodes, SpectralField(cutoff));
                for (std::size_t i = 1; i < nodes; ++i)
                    for (std::size_t m = 0; m < dim; ++m)
                        u[i].raw()[m] = weights.decay[m] * u[i - 1].raw()[m] +
                                        weights.wl[m] * integrand[i - 1].raw()[m] + weights.wr[m] * integrand[i].raw()[m];

                const std::size_t cell =
                    result.order_bucket(alpha.order()) * ndb + result.dim_bucket(alpha.dimension());
                double* hrow = hist.data() + cell * nodes;
                double sup_sq = 0.0;
                for (std::size_t i = 0; i < nodes; ++i) {
                    double sq = h_norm_sq(u[i]);
                    hrow[i] += sq;
                    sup_sq = std::max(sup_sq, sq);
                }
                const std::size_t global = begin + local;
                if (opts.record_alpha_norms)
                    result.alpha_norms[global] =
                        AlphaNorm{level, alpha.order(), alpha.dimension(), sup_sq, h_norm_sq(u[nodes - 1])};
                for (std::size_t s = 0; s < opts.snapshot_nodes.size(); ++s)
                    result.snapshots[s].fields[global] = u[opts.snapshot_nodes[s]];
                if (result.trajectory) result.trajectory->fields[global] = u;
                cur_level[local] = std::move(u);
            });
            prev_level.swap(cur_level);
        }
    }

    if (!std::isfinite(result.second_moment_at(nodes - 1)))
        throw GuardError("solve_propagator: non-finite second moment");
    return result;
}

// Spec-shaped entry point: every coefficient at every node.
inline ChaosTrajectory solve_propagator(const SystemOperators& ops, const SpectralField& u0,
                                        const TruncationSet& trunc, const TimeGrid& grid,
                                        const ForcingTerms& forcing = {}, SolveOptions opts = {}) {
    opts.keep_trajectory = true;
    SolveResult result = solve_propagator_detailed(ops, u0, trunc, grid, forcing, opts);
    return std::move(*result.trajectory);
}

}  // namespace chaospde
