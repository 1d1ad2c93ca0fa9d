#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "chaospde/budget.hpp"
#include "chaospde/config.hpp"
#include "chaospde/csv.hpp"
#include "chaospde/solver.hpp"

namespace chaospde {
namespace cli {

inline double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double denom = static_cast<double>(n) * sxx - sx * sx;
    return (static_cast<double>(n) * sxy - sx * sy) / denom;
}

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    if (lx.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    return least_squares_slope(lx, ly);
}

// Raw and alternation-averaged decay slopes of the endpoint integrals
// |I_k(T)| over k in [k_lo, k_hi]. The averaged estimator pairs consecutive
// k to cancel the alternating-sign endpoint component.
struct DecaySlopes {
    double raw = 0.0;
    double pair_averaged = 0.0;
};

inline DecaySlopes endpoint_decay_slopes(const std::vector<double>& endpoint_by_k, int k_lo, int k_hi) {
    std::vector<double> ks, vals;
    for (int k = k_lo; k <= k_hi; ++k) {
        ks.push_back(static_cast<double>(k));
        vals.push_back(std::fabs(endpoint_by_k[static_cast<std::size_t>(k - 1)]));
    }
    DecaySlopes slopes;
    slopes.raw = loglog_slope(ks, vals);
    std::vector<double> pk, pv;
    for (int k = k_lo; k + 1 <= k_hi; k += 2) {
        pk.push_back(static_cast<double>(k) + 0.5);
        pv.push_back(std::fabs(0.5 * (endpoint_by_k[static_cast<std::size_t>(k - 1)] +
                                      endpoint_by_k[static_cast<std::size_t>(k)])));
    }
    slopes.pair_averaged = loglog_slope(pk, pv);
    return slopes;
}

namespace detail {

// Quadrature oracle for the defining integral of I_k(t). For OU the double
// integral is reduced by integrating the exponential kernel in its outer
// variable first, leaving a smooth single integral handled by Simpson.
inline double filtered_integral_oracle(const NoiseSpec& spec, int k, const TimeGrid& grid, std::size_t upto) {
    std::vector<double> values(grid.nodes(), 0.0);
    double t = grid.node(upto);
    switch (spec.kind) {
        case NoiseKind::White:
            for (std::size_t i = 0; i <= upto; ++i) values[i] = eval_basis(k, grid.node(i), spec.T);
            break;
        case NoiseKind::OrnsteinUhlenbeck:
            for (std::size_t i = 0; i <= upto; ++i) {
                double s = grid.node(i);
                values[i] = eval_basis(k, s, spec.T) * std::exp(-spec.b * (t - s));
            }
            break;
        case NoiseKind::Fractional:
            throw std::invalid_argument("filtered_integral_oracle: closed-form comparison is white/OU only");
    }
    return simpson_prefix(grid, values, upto);
}

}  // namespace detail

// validate-basis: runs the basis/noise invariant battery and writes rows
// (check, residual, tolerance, pass).
inline void cmd_validate_basis(const ExperimentConfig& cfg, int threads) {
    (void)threads;
    CsvWriter csv(cfg.out);
    csv.row({"check", "residual", "tolerance", "pass"});
    auto emit = [&csv](const std::string& name, double residual, double tol) {
        csv.row({name, CsvWriter::fmt(residual), CsvWriter::fmt(tol), residual <= tol ? "1" : "0"});
    };
    const double T = cfg.T;

    {  // Gram matrix of the cosine basis
        TimeGrid grid(T, 4096);
        std::vector<std::vector<double>> rows;
        for (int k = 1; k <= 64; ++k) rows.push_back(sample_basis(k, grid));
        double worst = 0.0;
        for (int j = 1; j <= 64; ++j)
            for (int k = j; k <= 64; ++k) {
                double v = inner_product(grid, rows[static_cast<std::size_t>(j - 1)], rows[static_cast<std::size_t>(k - 1)]);
                worst = std::max(worst, std::fabs(v - (j == k ? 1.0 : 0.0)));
            }
        emit("gram_identity_M4096_n64", worst, 1e-7);
    }

    {  // trapezoid refinement order on a smooth integrand
        auto integral_at = [&](std::size_t M) {
            TimeGrid grid(T, M);
            auto f = grid.sample([&](double t) { return std::exp(t) * std::cos(3.0 * t); });
            auto g = grid.sample([&](double t) { return 1.0 / (1.0 + t); });
            return inner_product(grid, f, g);
        };
        double i1 = integral_at(1024), i2 = integral_at(2048), i3 = integral_at(4096);
        double ratio = (i1 - i2) / (i2 - i3);
        emit("quadrature_refinement_ratio", std::fabs(ratio - 4.0), 0.5);
    }

    {  // white endpoint integrals vanish for k >= 2
        NoiseSpec white = NoiseSpec::white(T);
        double worst = 0.0;
        for (int k = 2; k <= 64; ++k) worst = std::max(worst, std::fabs(filtered_basis_integral_closed(white, k, T)));
        emit("white_endpoint_integral_zero", worst, 1e-12);
    }

    {  // closed forms vs quadrature of the defining integral
        TimeGrid grid(T, 4096);
        std::vector<std::size_t> probes = {grid.subintervals() / 4, grid.subintervals() / 2,
                                           3 * grid.subintervals() / 4, grid.subintervals()};
        NoiseSpec white = NoiseSpec::white(T);
        double worst = 0.0;
        for (int k = 1; k <= 64; ++k)
            for (std::size_t upto : probes)
                worst = std::max(worst, std::fabs(filtered_basis_integral_closed(white, k, grid.node(upto)) -
                                                  detail::filtered_integral_oracle(white, k, grid, upto)));
        emit("integral_closed_vs_quadrature_white", worst, 1e-6);
        for (double b : {0.5, 1.0, 2.0}) {
            NoiseSpec ou = NoiseSpec::ornstein_uhlenbeck(b, T);
            worst = 0.0;
            for (int k = 1; k <= 64; ++k)
                for (std::size_t upto : probes)
                    worst = std::max(worst, std::fabs(filtered_basis_integral_closed(ou, k, grid.node(upto)) -
                                                      detail::filtered_integral_oracle(ou, k, grid, upto)));
            char name[64];
            std::snprintf(name, sizeof(name), "integral_closed_vs_quadrature_ou_b%g", b);
            emit(name, worst, 1e-6);
        }
    }

    {  // representation operator norm bound on random trigonometric polynomials
        TimeGrid grid(T, 2048);
        for (auto spec : {NoiseSpec::white(T), NoiseSpec::ornstein_uhlenbeck(1.0, T), NoiseSpec::fractional(0.75, T)}) {
            double worst = 0.0;
            double bound = operator_norm_bound(spec);
            for (int trial = 0; trial < 20; ++trial) {
                std::vector<double> f(grid.nodes(), 0.0);
                for (int j = 1; j <= 10; ++j) {
                    double a = rng::counter_normal(42, static_cast<std::uint64_t>(j), 1,
                                                   static_cast<std::uint64_t>(trial), 99);
                    auto mj = sample_basis(j, grid);
                    for (std::size_t i = 0; i < f.size(); ++i) f[i] += a * mj[i];
                }
                auto kf = apply_noise_operator(spec, grid, f);
                double ratio = std::sqrt(inner_product(grid, kf, kf) / inner_product(grid, f, f));
                worst = std::max(worst, ratio / bound - 1.0);
            }
            const char* kind = spec.kind == NoiseKind::White ? "white"
                               : spec.kind == NoiseKind::OrnsteinUhlenbeck ? "ou" : "fractional";
            emit(std::string("operator_norm_bound_") + kind, std::max(0.0, worst), 1e-3);
        }
    }

    {  // partial variance monotone in n
        for (auto spec : {NoiseSpec::white(T), NoiseSpec::ornstein_uhlenbeck(1.0, T), NoiseSpec::fractional(0.75, T)}) {
            TimeGrid grid(T, 1024);
            NoiseDiscretization disc(spec, grid, 48);
            std::size_t mid = grid.subintervals() / 2;
            double prev = 0.0, worst_drop = 0.0;
            for (int n = 1; n <= 48; ++n) {
                double ik = disc.integral_at_node(n, mid);
                double cur = prev + ik * ik;
                worst_drop = std::max(worst_drop, prev - cur);
                prev = cur;
            }
            const char* kind = spec.kind == NoiseKind::White ? "white"
                               : spec.kind == NoiseKind::OrnsteinUhlenbeck ? "ou" : "fractional";
            emit(std::string("partial_variance_monotone_") + kind, worst_drop, 1e-15);
        }
    }

    {  // fractional endpoint decay slopes
        for (double H : {0.6, 0.75, 0.9}) {
            NoiseSpec spec = NoiseSpec::fractional(H, T);
            TimeGrid grid(T, 4096);
            NoiseDiscretization disc(spec, grid, 64);
            std::vector<double> endpoint(64);
            for (int k = 1; k <= 64; ++k) endpoint[static_cast<std::size_t>(k - 1)] = disc.integral_row(k).back();
            DecaySlopes slopes = endpoint_decay_slopes(endpoint, 8, 64);
            double target = -(1.5 - H);
            char name[64];
            std::snprintf(name, sizeof(name), "fractional_endpoint_slope_H%g", H);
            emit(name, std::fabs((slopes.pair_averaged - target) / target), 0.10);
            std::snprintf(name, sizeof(name), "fractional_endpoint_slope_raw_H%g", H);
            emit(name, std::fabs((slopes.raw - target) / target), std::numeric_limits<double>::infinity());
        }
    }

    {  // fractional variance approaches t^{2H}
        NoiseSpec spec = NoiseSpec::fractional(0.75, T);
        double v = variance_partial_sum(spec, 512, T, 2048);
        emit("fractional_variance_limit_H0.75", std::fabs(v - std::pow(T, 1.5)) / std::pow(T, 1.5), 0.02);
    }

    {  // fractional quadrature refinement stability on m_1
        NoiseSpec spec = NoiseSpec::fractional(0.75, T);
        TimeGrid coarse(T, 2048), fine(T, 4096);
        auto kc = apply_noise_operator(spec, coarse, sample_basis(1, coarse));
        auto kf = apply_noise_operator(spec, fine, sample_basis(1, fine));
        double worst = 0.0;
        for (std::size_t i = 0; i <= 2048; ++i) worst = std::max(worst, std::fabs(kc[i] - kf[2 * i]));
        emit("fractional_apply_refinement_m1", worst, 1e-4);
    }

    {  // OU covariance of X(t): the kernel determines (e^{-b|t-s|} - e^{-b(t+s)})/(2b)
        double b = 1.0;
        NoiseSpec ou = NoiseSpec::ornstein_uhlenbeck(b, T);
        double t = T, s = 0.5 * T;
        double measured = covariance_partial_sum(ou, 4000, t, s);
        double derived = (std::exp(-b * (t - s)) - std::exp(-b * (t + s))) / (2.0 * b);
        double stationary_claim = std::exp(-b * (t - s));
        emit("ou_covariance_matches_derived_form", std::fabs(measured - derived), 1e-4);
        emit("ou_covariance_matches_stationary_claim", std::fabs(measured - stationary_claim), 1e-4);
    }

    csv.close();
}

// moments: per-node rows (t, second_moment, level_0..level_N,
// mean_field_norm, moment_bound).
inline void cmd_moments(const ExperimentConfig& cfg, int threads) {
    SystemOperators ops = make_system(cfg, cfg.T);
    SpectralField u0 = make_initial_field(cfg);
    TruncationSet trunc = enumerate_truncation(cfg.N, cfg.n, cfg.r, cfg.enum_limit);
    TimeGrid grid(cfg.T, cfg.M);
    SolveOptions opts;
    opts.threads = threads;
    opts.record_alpha_norms = false;
    SolveResult result = solve_propagator_detailed(ops, u0, trunc, grid, {}, opts);
    ErrorBudget budget = make_error_budget(ops, u0, cfg.T);
    double bound = moment_bound(budget);

    CsvWriter csv(cfg.out);
    std::vector<std::string> header = {"t", "second_moment"};
    for (int k = 0; k <= cfg.N; ++k) header.push_back("level_" + std::to_string(k));
    header.push_back("mean_field_norm");
    header.push_back("moment_bound");
    csv.row(header);
    for (std::size_t i = 0; i < grid.nodes(); ++i) {
        std::vector<std::string> row = {CsvWriter::fmt(grid.node(i)), CsvWriter::fmt(result.second_moment_at(i))};
        for (int k = 0; k <= cfg.N; ++k) row.push_back(CsvWriter::fmt(result.level_energy[static_cast<std::size_t>(k)][i]));
        row.push_back(CsvWriter::fmt(std::sqrt(result.level_energy[0][i])));
        row.push_back(CsvWriter::fmt(bound));
        csv.row(row);
    }
    csv.close();
}

// sample: realization dump at t = T plus pointwise summary statistics.
inline void cmd_sample(const ExperimentConfig& cfg, int threads) {
    SystemOperators ops = make_system(cfg, cfg.T);
    SpectralField u0 = make_initial_field(cfg);
    TruncationSet trunc = enumerate_truncation(cfg.N, cfg.n, cfg.r, cfg.enum_limit);
    TimeGrid grid(cfg.T, cfg.M);
    SolveOptions opts;
    opts.threads = threads;
    opts.record_alpha_norms = false;
    opts.snapshot_nodes = {grid.subintervals()};
    SolveResult result = solve_propagator_detailed(ops, u0, trunc, grid, {}, opts);
    const ChaosCoefficients& coeffs = result.snapshots[0];

    const std::size_t P = cfg.sample_points;
    std::vector<std::vector<double>> real_fields(coeffs.size());
    for (std::size_t a = 0; a < coeffs.size(); ++a) real_fields[a] = coeffs.fields[a].sample_real_space(P);

    CsvWriter csv(cfg.out);
    std::vector<std::string> header = {"sample_id"};
    for (std::size_t p = 0; p < P; ++p) header.push_back("x_" + std::to_string(p));
    csv.row(header);

    std::vector<double> mean_mc(P, 0.0), var_mc(P, 0.0);
    const int n = std::max(1, trunc.max_order);
    const int r = std::max(1, trunc.max_dimension);
    std::vector<double> xi(coeffs.size());
    for (std::size_t s = 0; s < cfg.mc_samples; ++s) {
        GaussianSample g = sample_gaussians(n, r, cfg.seed, s);
        for (std::size_t a = 0; a < coeffs.size(); ++a)
            xi[a] = cameron_martin_eval(trunc.members[a], g);
        std::vector<std::string> row = {CsvWriter::fmt(s)};
        for (std::size_t p = 0; p < P; ++p) {
            double v = 0.0;
            for (std::size_t a = 0; a < coeffs.size(); ++a) v += xi[a] * real_fields[a][p];
            mean_mc[p] += v;
            var_mc[p] += v * v;
            row.push_back(CsvWriter::fmt(v));
        }
        csv.row(row);
    }
    const double S = static_cast<double>(cfg.mc_samples);
    std::vector<std::string> row_mean = {"mean_mc"}, row_mean_exact = {"mean_exact"}, row_var = {"var_mc"},
                             row_var_exact = {"var_exact"};
    for (std::size_t p = 0; p < P; ++p) {
        double m = mean_mc[p] / S;
        row_mean.push_back(CsvWriter::fmt(m));
        row_mean_exact.push_back(CsvWriter::fmt(real_fields[0][p]));
        row_var.push_back(CsvWriter::fmt(std::max(0.0, var_mc[p] / S - m * m)));
        double ve = 0.0;
        for (std::size_t a = 1; a < coeffs.size(); ++a) ve += real_fields[a][p] * real_fields[a][p];
        row_var_exact.push_back(CsvWriter::fmt(ve));
    }
    csv.row(row_mean);
    csv.row(row_mean_exact);
    csv.row(row_var);
    csv.row(row_var_exact);
    csv.close();
    (void)threads;
}

enum class SweepAxis { Length, Order, Dimension, Tau };

inline SweepAxis parse_axis(const std::string& axis) {
    if (axis == "N") return SweepAxis::Length;
    if (axis == "n") return SweepAxis::Order;
    if (axis == "r") return SweepAxis::Dimension;
    if (axis == "tau") return SweepAxis::Tau;
    throw ConfigError("sweep: unknown axis '" + axis + "' (expected N, n, r, or tau)");
}

// sweep: measured truncation tails against an enriched reference next to the
// matching theoretical bounds; a fitted log-log slope closes the file.
inline void cmd_sweep(const ExperimentConfig& cfg, const std::string& axis_name, int threads) {
    const SweepAxis axis = parse_axis(axis_name);
    SystemOperators ops = make_system(cfg, cfg.T);
    SpectralField u0 = make_initial_field(cfg);
    ErrorBudget budget = make_error_budget(ops, u0, cfg.T);
    TimeGrid grid(cfg.T, cfg.M);

    std::vector<int> values = cfg.sweep_values;
    if (values.empty()) {
        switch (axis) {
            case SweepAxis::Length: values = {1, 2, 3, 4}; break;
            case SweepAxis::Order: values = {4, 8, 16, 32}; break;
            case SweepAxis::Dimension:
                for (int r = 1; r <= static_cast<int>(ops.noises.size()); ++r) values.push_back(r);
                break;
            case SweepAxis::Tau: values = {2, 4, 8, 16}; break;
        }
    }
    std::sort(values.begin(), values.end());

    CsvWriter csv(cfg.out);
    csv.row({"axis", "value", "measured_sup", "measured_end", "bound_uniform", "bound_endpoint"});
    std::vector<double> xend, yend, xsup, ysup;
    auto emit = [&](double value, double msup, double mend, double bu, double be) {
        csv.row({axis_name, CsvWriter::fmt(value), CsvWriter::fmt(msup), CsvWriter::fmt(mend), CsvWriter::fmt(bu),
                 CsvWriter::fmt(be)});
        xend.push_back(value);
        yend.push_back(mend);
        xsup.push_back(value);
        ysup.push_back(msup);
    };

    SolveOptions opts;
    opts.threads = threads;
    opts.record_alpha_norms = false;

    switch (axis) {
        case SweepAxis::Length: {
            int n_max = *std::max_element(values.begin(), values.end());
            TruncationSet ref = enumerate_truncation(n_max + 2, cfg.n, cfg.r, cfg.enum_limit);
            SolveResult result = solve_propagator_detailed(ops, u0, ref, grid, {}, opts);
            for (int N : values) {
                std::vector<double> tail(grid.nodes(), 0.0);
                for (int level = N + 1; level <= ref.max_length; ++level)
                    for (std::size_t i = 0; i < grid.nodes(); ++i)
                        tail[i] += result.level_energy[static_cast<std::size_t>(level)][i];
                double bound = level_tail_bound(budget, N);
                emit(N, *std::max_element(tail.begin(), tail.end()), tail.back(), bound, bound);
            }
            break;
        }
        case SweepAxis::Order: {
            int max_n = *std::max_element(values.begin(), values.end());
            opts.order_breaks = values;
            TruncationSet ref = enumerate_truncation(cfg.N, 2 * max_n, cfg.r, cfg.enum_limit);
            SolveResult result = solve_propagator_detailed(ops, u0, ref, grid, {}, opts);
            for (int n : values) {
                TailSeries series = tail_series(result, cfg.N, n, cfg.r);
                TruncationTails sup = series.sup(), end = series.end();
                BoundPair bound = order_tail_bounds(budget, n);
                emit(n, sup.order, end.order, bound.uniform, bound.endpoint);
            }
            break;
        }
        case SweepAxis::Dimension: {
            opts.dim_breaks = values;
            TruncationSet ref = enumerate_truncation(cfg.N, cfg.n, static_cast<int>(ops.noises.size()), cfg.enum_limit);
            SolveResult result = solve_propagator_detailed(ops, u0, ref, grid, {}, opts);
            for (int r : values) {
                TailSeries series = tail_series(result, cfg.N, cfg.n, r);
                TruncationTails sup = series.sup(), end = series.end();
                double bound = dimension_tail_bound(budget, r);
                emit(r, sup.dimension, end.dimension, bound, bound);
            }
            break;
        }
        case SweepAxis::Tau: {
            if (!ops.all_diagonal())
                throw ConfigError("sweep: the tau axis requires diagonal couplings (exact-moment error path)");
            for (int K : values) {
                double tau = cfg.T / static_cast<double>(K);
                double err = multistep_error_exact(ops, u0, cfg.N, cfg.n, cfg.N + 2,
                                                   std::min(4 * cfg.n, 512), cfg.r, K, cfg.T, cfg.M);
                SystemOperators step_ops = ops;
                for (auto& noise : step_ops.noises) noise = noise.with_horizon(tau);
                ErrorBudget step_budget = make_error_budget(step_ops, u0, tau);
                MultistepBound bound = multistep_error_bound(step_budget, cfg.N, cfg.n, cfg.r, tau);
                csv.row({axis_name, CsvWriter::fmt(tau), CsvWriter::fmt(err), CsvWriter::fmt(err),
                         CsvWriter::fmt(bound.printed), CsvWriter::fmt(bound.tau_variant)});
                xend.push_back(tau);
                yend.push_back(err);
                xsup.push_back(tau);
                ysup.push_back(err);
            }
            break;
        }
    }
    csv.row({"slope_fit", "", CsvWriter::fmt(loglog_slope(xsup, ysup)), CsvWriter::fmt(loglog_slope(xend, yend)), "",
             ""});
    csv.close();
}

// multistep: per-step rows (j, t_j, mc_moment, mc_stderr, exact_moment,
// error_bound, error_bound_alt).
inline void cmd_multistep(const ExperimentConfig& cfg, int threads) {
    SystemOperators ops = make_system(cfg, cfg.T);
    SpectralField u0 = make_initial_field(cfg);
    MultistepOptions opts;
    opts.step_subintervals = cfg.M;
    opts.mc_samples = cfg.mc_samples;
    opts.seed = cfg.seed;
    opts.threads = threads;
    opts.want_exact = ops.all_diagonal();
    MultistepResult result = multistep_solve(ops, u0, cfg.N, cfg.n, cfg.r, cfg.K_steps, cfg.T, opts);

    double tau = result.tau;
    SystemOperators step_ops = ops;
    for (auto& noise : step_ops.noises) noise = noise.with_horizon(tau);
    ErrorBudget step_budget = make_error_budget(step_ops, u0, tau);
    MultistepBound bound = multistep_error_bound(step_budget, cfg.N, cfg.n, cfg.r, tau);

    CsvWriter csv(cfg.out);
    csv.row({"j", "t", "mc_moment", "mc_stderr", "exact_moment", "error_bound", "error_bound_alt"});
    for (const auto& step : result.steps) {
        std::vector<std::string> row = {CsvWriter::fmt(step.j), CsvWriter::fmt(step.t)};
        row.push_back(std::isnan(step.mc_moment) ? "" : CsvWriter::fmt(step.mc_moment));
        row.push_back(std::isnan(step.mc_se) ? "" : CsvWriter::fmt(step.mc_se));
        row.push_back(result.exact_path || step.j == 0 ? CsvWriter::fmt(step.exact_moment) : "");
        row.push_back(step.j == 0 ? "" : CsvWriter::fmt(bound.printed));
        row.push_back(step.j == 0 ? "" : CsvWriter::fmt(bound.tau_variant));
        csv.row(row);
    }
    csv.close();
}

}  // namespace cli
}  // namespace chaospde
