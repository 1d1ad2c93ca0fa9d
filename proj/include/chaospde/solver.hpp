#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "chaospde/chaos.hpp"
#include "chaospde/propagator.hpp"

namespace chaospde {

struct MomentReport {
    double t = 0.0;
    double second_moment = 0.0;
    std::vector<double> per_level;  // k = 0..N
    SpectralField mean_field;
};

// Exact Parseval sum over the stored coefficients, grouped by |alpha|.
inline MomentReport second_moment(const ChaosCoefficients& coeffs) {
    if (!coeffs.truncation) throw std::invalid_argument("second_moment: empty coefficient set");
    MomentReport report;
    report.t = coeffs.t;
    report.per_level.assign(static_cast<std::size_t>(coeffs.truncation->max_length) + 1, 0.0);
    for (std::size_t i = 0; i < coeffs.fields.size(); ++i) {
        double sq = h_norm_sq(coeffs.fields[i]);
        report.per_level[static_cast<std::size_t>(coeffs.truncation->members[i].length())] += sq;
        report.second_moment += sq;
    }
    report.mean_field = coeffs.fields.empty() ? SpectralField() : coeffs.fields[0];
    return report;
}

inline MomentReport moment_report_at(const SolveResult& result, std::size_t node) {
    MomentReport report;
    report.t = result.grid.node(node);
    report.per_level.resize(result.level_energy.size());
    for (std::size_t k = 0; k < result.level_energy.size(); ++k) {
        report.per_level[k] = result.level_energy[k][node];
        report.second_moment += result.level_energy[k][node];
    }
    return report;
}

// u(t) = sum_alpha u_alpha(t) xi_alpha evaluated at one Gaussian sample.
inline SpectralField sample_realization(const ChaosCoefficients& coeffs, const GaussianSample& sample) {
    if (!coeffs.truncation) throw std::invalid_argument("sample_realization: empty coefficient set");
    if (sample.max_order < coeffs.truncation->max_order || sample.max_dimension < coeffs.truncation->max_dimension)
        throw std::invalid_argument("sample_realization: sample does not cover the truncation set");
    SpectralField out(coeffs.fields.empty() ? 0 : coeffs.fields[0].cutoff());
    for (std::size_t i = 0; i < coeffs.fields.size(); ++i) {
        double xi = cameron_martin_eval(coeffs.truncation->members[i], sample);
        SpectralField term = coeffs.fields[i];
        term *= xi;
        out += term;
    }
    return out;
}

struct McMomentStats {
    std::size_t samples = 0;
    double mean_sq = 0.0;      // MC estimate of E||u||_H^2
    double se_sq = 0.0;        // standard error of mean_sq
    SpectralField mean_field;  // MC estimate of E u
};

inline McMomentStats mc_moment_stats(const ChaosCoefficients& coeffs, std::size_t samples, std::uint64_t seed,
                                     std::uint64_t stream = 0, int threads = 1) {
    if (samples == 0) throw std::invalid_argument("mc_moment_stats: need at least one sample");
    const int n = std::max(1, coeffs.truncation->max_order);
    const int r = std::max(1, coeffs.truncation->max_dimension);
    const int cutoff = coeffs.fields.empty() ? 0 : coeffs.fields[0].cutoff();
    const std::size_t block = 256;
    const std::size_t nblocks = (samples + block - 1) / block;
    struct Partial {
        double sum_sq = 0.0;
        double sum_sq2 = 0.0;
        SpectralField sum_field;
    };
    std::vector<Partial> partials(nblocks);
    parallel_for(nblocks, threads, [&](std::size_t blk) {
        Partial p;
        p.sum_field = SpectralField(cutoff);
        const std::size_t lo = blk * block;
        const std::size_t hi = std::min(samples, lo + block);
        for (std::size_t s = lo; s < hi; ++s) {
            GaussianSample g = sample_gaussians(n, r, seed, s, stream);
            SpectralField u = sample_realization(coeffs, g);
            double sq = h_norm_sq(u);
            p.sum_sq += sq;
            p.sum_sq2 += sq * sq;
            p.sum_field += u;
        }
        partials[blk] = std::move(p);
    });
    double sum_sq = 0.0, sum_sq2 = 0.0;
    SpectralField sum_field(cutoff);
    for (auto& p : partials) {
        sum_sq += p.sum_sq;
        sum_sq2 += p.sum_sq2;
        sum_field += p.sum_field;
    }
    McMomentStats stats;
    stats.samples = samples;
    stats.mean_sq = sum_sq / static_cast<double>(samples);
    double var = std::max(0.0, sum_sq2 / static_cast<double>(samples) - stats.mean_sq * stats.mean_sq);
    stats.se_sq = std::sqrt(var / static_cast<double>(samples));
    sum_field *= 1.0 / static_cast<double>(samples);
    stats.mean_field = std::move(sum_field);
    return stats;
}

// Orthogonal truncation-error components measured inside a reference set:
// coefficients beyond length N, then beyond order n, then beyond dimension r.
struct TruncationTails {
    double level = 0.0;
    double order = 0.0;
    double dimension = 0.0;
};

inline TruncationTails truncation_tail(const ChaosCoefficients& reference, int N, int n, int r) {
    const auto& trunc = *reference.truncation;
    if (trunc.max_length < N || trunc.max_order < n || trunc.max_dimension < r)
        throw std::invalid_argument("truncation_tail: reference does not contain the target truncation");
    TruncationTails tails;
    for (std::size_t i = 0; i < reference.fields.size(); ++i) {
        const MultiIndex& alpha = trunc.members[i];
        double sq = h_norm_sq(reference.fields[i]);
        if (alpha.length() > N)
            tails.level += sq;
        else if (alpha.order() > n)
            tails.order += sq;
        else if (alpha.dimension() > r)
            tails.dimension += sq;
    }
    return tails;
}

// Per-node tail series assembled from the solve histogram. n must be one of
// the solve's order breaks (or the reference order), r one of the dim breaks
// (or the reference dimension).
struct TailSeries {
    std::vector<double> level;
    std::vector<double> order;
    std::vector<double> dimension;

    TruncationTails at(std::size_t node) const { return {level[node], order[node], dimension[node]}; }
    TruncationTails sup() const {
        auto mx = [](const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); };
        return {mx(level), mx(order), mx(dimension)};
    }
    TruncationTails end() const { return {level.back(), order.back(), dimension.back()}; }
};

inline TailSeries tail_series(const SolveResult& reference, int N, int n, int r) {
    const auto& trunc = *reference.truncation;
    if (trunc.max_length < N || trunc.max_order < n || trunc.max_dimension < r)
        throw std::invalid_argument("tail_series: reference does not contain the target truncation");
    bool n_ok = n == trunc.max_order;
    for (int edge : reference.order_breaks) n_ok = n_ok || edge == n;
    bool r_ok = r == trunc.max_dimension;
    for (int edge : reference.dim_breaks) r_ok = r_ok || edge == r;
    if (!n_ok || !r_ok)
        throw std::invalid_argument("tail_series: target order/dimension does not lie on a histogram edge");

    const std::size_t nodes = reference.grid.nodes();
    const std::size_t nob = reference.order_breaks.size() + 1;
    const std::size_t ndb = reference.dim_breaks.size() + 1;
    const std::size_t ob_cut = reference.order_bucket(n);
    const std::size_t db_cut = reference.dim_bucket(r);

    TailSeries series;
    series.level.assign(nodes, 0.0);
    series.order.assign(nodes, 0.0);
    series.dimension.assign(nodes, 0.0);
    for (int level = 0; level <= trunc.max_length; ++level) {
        for (std::size_t ob = 0; ob < nob; ++ob) {
            for (std::size_t db = 0; db < ndb; ++db) {
                const auto& row = reference.energy_hist[reference.hist_index(level, ob, db)];
                std::vector<double>* target = nullptr;
                if (level > N)
                    target = &series.level;
                else if (ob > ob_cut)
                    target = &series.order;
                else if (db > db_cut)
                    target = &series.dimension;
                if (target)
                    for (std::size_t i = 0; i < nodes; ++i) (*target)[i] += row[i];
            }
        }
    }
    return series;
}

// Truncated Wick-exponential series sum_{m<=N} S^m / m!.
inline double truncated_exponential_series(double S, int N) {
    double acc = 1.0, term = 1.0;
    for (int m = 1; m <= N; ++m) {
        term *= S / static_cast<double>(m);
        acc += term;
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Multistep scheme: one-step solves on [0, tau] composed over K steps with a
// fresh independent Gaussian block per step.
// ---------------------------------------------------------------------------

struct MultistepStep {
    int j = 0;
    double t = 0.0;
    double mc_moment = std::numeric_limits<double>::quiet_NaN();
    double mc_se = std::numeric_limits<double>::quiet_NaN();
    double exact_moment = std::numeric_limits<double>::quiet_NaN();
};

struct MultistepResult {
    double tau = 0.0;
    bool exact_path = false;
    std::vector<MultistepStep> steps;  // j = 0..K, step 0 = initial data
};

struct MultistepOptions {
    std::size_t step_subintervals = 256;
    std::size_t mc_samples = 0;  // 0 = skip the MC path
    std::uint64_t seed = 1;
    int threads = 1;
    bool want_exact = true;
};

namespace detail {

// Diagonal per-step transfer: S = sum_l sigma_l^2 V_n^{(l)}(tau) and the
// integrated filtered-basis values feeding the sampled transfer factor.
struct DiagonalStepData {
    double S = 0.0;
    double EZ2 = 0.0;
    std::vector<std::vector<double>> weights;  // [l][k-1] = sigma_l * I_k(tau)
};

inline DiagonalStepData diagonal_step_data(const SystemOperators& ops, int N, int n, int r, double tau,
                                           std::size_t step_M) {
    DiagonalStepData data;
    TimeGrid step_grid(tau, step_M);
    data.weights.resize(static_cast<std::size_t>(r));
    for (int l = 1; l <= r; ++l) {
        NoiseSpec noise = ops.noises[static_cast<std::size_t>(l - 1)].with_horizon(tau);
        NoiseDiscretization disc(noise, step_grid, n);
        double sigma = ops.couplings[static_cast<std::size_t>(l - 1)].diagonal_factor();
        auto& w = data.weights[static_cast<std::size_t>(l - 1)];
        w.resize(static_cast<std::size_t>(n));
        for (int k = 1; k <= n; ++k) {
            double ik = disc.integral_at_node(k, step_M);
            w[static_cast<std::size_t>(k - 1)] = sigma * ik;
            data.S += sigma * sigma * ik * ik;
        }
    }
    data.EZ2 = truncated_exponential_series(data.S, N);
    return data;
}

// Transfer factor Z = sum_{m<=N} P_m with P_m the degree-m part of
// exp(A t - B t^2/2) at t = 1, A = sum c_{kl} xi_{kl}, B = sum c_{kl}^2:
//   P_0 = 1, P_1 = A, m P_m = A P_{m-1} - B P_{m-2}.
// Identical to the truncated chaos contraction over |alpha| <= N,
// order <= n, dimension <= r.
inline double diagonal_transfer_sample(const DiagonalStepData& data, int N, std::uint64_t seed, std::uint64_t sample,
                                       std::uint64_t step) {
    double A = 0.0;
    for (std::size_t l = 0; l < data.weights.size(); ++l) {
        const auto& w = data.weights[l];
        for (std::size_t k = 0; k < w.size(); ++k) {
            if (w[k] == 0.0) continue;
            A += w[k] * rng::counter_normal(seed, k + 1, l + 1, sample, step);
        }
    }
    double z = 1.0, pm1 = 1.0, pm2 = 0.0;
    for (int m = 1; m <= N; ++m) {
        double pm = (A * pm1 - data.S * pm2) / static_cast<double>(m);
        z += pm;
        pm2 = pm1;
        pm1 = pm;
    }
    return z;
}

}  // namespace detail

// Runs the multistep approximation over a uniform partition of [0, T] into K
// steps. Diagonal couplings: the exact-moment path propagates the per-mode
// covariance through the per-step transfer factor; the MC path samples the
// scalar transfer. General couplings: the MC path solves the propagator
// system per sample per step with the realized field as initial data.
inline MultistepResult multistep_solve(const SystemOperators& ops, const SpectralField& u0, int N, int n, int r,
                                       int K, double T, const MultistepOptions& opts = {}) {
    if (K < 1) throw std::invalid_argument("multistep_solve: need at least one step");
    const double tau = T / static_cast<double>(K);
    const bool diagonal = ops.all_diagonal();
    if (opts.want_exact && !diagonal)
        throw std::invalid_argument("multistep_solve: exact-moment path requires diagonal couplings");

    MultistepResult result;
    result.tau = tau;
    result.exact_path = opts.want_exact && diagonal;
    result.steps.resize(static_cast<std::size_t>(K) + 1);

    std::vector<double> base_sq(static_cast<std::size_t>(K) + 1);
    for (int j = 0; j <= K; ++j)
        base_sq[static_cast<std::size_t>(j)] = h_norm_sq(semigroup_apply(ops.generator, tau * j, u0));

    result.steps[0].j = 0;
    result.steps[0].t = 0.0;
    result.steps[0].exact_moment = base_sq[0];
    result.steps[0].mc_moment = base_sq[0];
    result.steps[0].mc_se = 0.0;

    if (diagonal) {
        auto data = detail::diagonal_step_data(ops, N, n, r, tau, opts.step_subintervals);
        double ez_pow = 1.0;
        for (int j = 1; j <= K; ++j) {
            ez_pow *= data.EZ2;
            result.steps[static_cast<std::size_t>(j)].j = j;
            result.steps[static_cast<std::size_t>(j)].t = tau * j;
            if (result.exact_path) result.steps[static_cast<std::size_t>(j)].exact_moment = base_sq[static_cast<std::size_t>(j)] * ez_pow;
        }
        if (opts.mc_samples > 0) {
            const std::size_t S = opts.mc_samples;
            const std::size_t block = 256;
            const std::size_t nblocks = (S + block - 1) / block;
            std::vector<std::vector<double>> block_sum(nblocks), block_sum2(nblocks);
            parallel_for(nblocks, opts.threads, [&](std::size_t blk) {
                auto& bs = block_sum[blk];
                auto& bs2 = block_sum2[blk];
                bs.assign(static_cast<std::size_t>(K), 0.0);
                bs2.assign(static_cast<std::size_t>(K), 0.0);
                const std::size_t lo = blk * block;
                const std::size_t hi = std::min(S, lo + block);
                for (std::size_t s = lo; s < hi; ++s) {
                    double prod = 1.0;
                    for (int j = 1; j <= K; ++j) {
                        prod *= detail::diagonal_transfer_sample(data, N, opts.seed, s, static_cast<std::uint64_t>(j));
                        double val = prod * prod;
                        bs[static_cast<std::size_t>(j - 1)] += val;
                        bs2[static_cast<std::size_t>(j - 1)] += val * val;
                    }
                }
            });
            for (int j = 1; j <= K; ++j) {
                double sum = 0.0, sum2 = 0.0;
                for (std::size_t blk = 0; blk < nblocks; ++blk) {
                    sum += block_sum[blk][static_cast<std::size_t>(j - 1)];
                    sum2 += block_sum2[blk][static_cast<std::size_t>(j - 1)];
                }
                double mean = sum / static_cast<double>(S);
                double var = std::max(0.0, sum2 / static_cast<double>(S) - mean * mean);
                auto& step = result.steps[static_cast<std::size_t>(j)];
                step.mc_moment = base_sq[static_cast<std::size_t>(j)] * mean;
                step.mc_se = base_sq[static_cast<std::size_t>(j)] * std::sqrt(var / static_cast<double>(S));
            }
        }
        return result;
    }

    // General couplings: per-sample propagation with the realized field as the
    // next initial condition. Cost scales with samples * K * solve cost.
    if (opts.mc_samples == 0)
        throw std::invalid_argument("multistep_solve: non-diagonal couplings need mc_samples > 0");
    TimeGrid step_grid(tau, opts.step_subintervals);
    SystemOperators step_ops = ops;
    for (auto& noise : step_ops.noises) noise = noise.with_horizon(tau);
    TruncationSet trunc = enumerate_truncation(N, n, r);

    const std::size_t S = opts.mc_samples;
    const std::size_t block = 16;
    const std::size_t nblocks = (S + block - 1) / block;
    std::vector<std::vector<double>> block_sum(nblocks), block_sum2(nblocks);
    parallel_for(nblocks, opts.threads, [&](std::size_t blk) {
        auto& bs = block_sum[blk];
        auto& bs2 = block_sum2[blk];
        bs.assign(static_cast<std::size_t>(K), 0.0);
        bs2.assign(static_cast<std::size_t>(K), 0.0);
        SolveOptions solve_opts;
        solve_opts.threads = 1;
        solve_opts.record_alpha_norms = false;
        solve_opts.snapshot_nodes = {step_grid.subintervals()};
        const std::size_t lo = blk * block;
        const std::size_t hi = std::min(S, lo + block);
        for (std::size_t s = lo; s < hi; ++s) {
            SpectralField field = u0;
            for (int j = 1; j <= K; ++j) {
                SolveResult step = solve_propagator_detailed(step_ops, field, trunc, step_grid, {}, solve_opts);
                GaussianSample g = sample_gaussians(std::max(1, n), std::max(1, r), opts.seed, s,
                                                    static_cast<std::uint64_t>(j));
                field = sample_realization(step.snapshots[0], g);
                double val = h_norm_sq(field);
                bs[static_cast<std::size_t>(j - 1)] += val;
                bs2[static_cast<std::size_t>(j - 1)] += val * val;
            }
        }
    });
    for (int j = 1; j <= K; ++j) {
        double sum = 0.0, sum2 = 0.0;
        for (std::size_t blk = 0; blk < nblocks; ++blk) {
            sum += block_sum[blk][static_cast<std::size_t>(j - 1)];
            sum2 += block_sum2[blk][static_cast<std::size_t>(j - 1)];
        }
        double mean = sum / static_cast<double>(S);
        double var = std::max(0.0, sum2 / static_cast<double>(S) - mean * mean);
        auto& step = result.steps[static_cast<std::size_t>(j)];
        step.j = j;
        step.t = tau * j;
        step.mc_moment = mean;
        step.mc_se = std::sqrt(var / static_cast<double>(S));
    }
    return result;
}

// Exact multistep truncation error for diagonal couplings, measured against
// an enriched per-step reference (refN, refn):
//   E||u_ref(T) - u(T)||^2 = ||Phi_T u0||^2 ((E Zref^2)^K - (E Z^2)^K).
inline double multistep_error_exact(const SystemOperators& ops, const SpectralField& u0, int N, int n, int refN,
                                    int refn, int r, int K, double T, std::size_t step_M = 256) {
    if (!ops.all_diagonal())
        throw std::invalid_argument("multistep_error_exact: diagonal couplings required");
    if (refN < N || refn < n) throw std::invalid_argument("multistep_error_exact: reference must contain the target");
    const double tau = T / static_cast<double>(K);
    auto target = detail::diagonal_step_data(ops, N, n, r, tau, step_M);
    auto reference = detail::diagonal_step_data(ops, refN, refn, r, tau, step_M);
    double pow_ref = 1.0, pow_target = 1.0;
    for (int j = 0; j < K; ++j) {
        pow_ref *= reference.EZ2;
        pow_target *= target.EZ2;
    }
    return h_norm_sq(semigroup_apply(ops.generator, T, u0)) * (pow_ref - pow_target);
}

}  // namespace chaospde
