#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "chaospde/budget.hpp"
#include "chaospde/solver.hpp"

using namespace chaospde;

namespace {

SystemOperators heat_system(NoiseSpec noise, CouplingOperator coupling) {
    SystemOperators ops;
    ops.generator = SpectralGenerator{0.0};
    ops.noises = {std::move(noise)};
    ops.couplings = {std::move(coupling)};
    return ops;
}

SolveResult solve_diagonal(const SystemOperators& ops, const SpectralField& u0, int N, int n, std::size_t M,
                           std::vector<std::size_t> snapshots = {}) {
    TimeGrid grid(1.0, M);
    SolveOptions opts;
    opts.snapshot_nodes = std::move(snapshots);
    return solve_propagator_detailed(ops, u0, enumerate_truncation(N, n, 1), grid, {}, opts);
}

}  // namespace

TEST_CASE("second moment of the pure heat flow", "[solver]") {
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, 4);
    SystemOperators ops = heat_system(NoiseSpec::white(1.0), CouplingOperator::diagonal(0.5));
    SolveResult result = solve_diagonal(ops, u0, 0, 1, 128, {64, 128});
    for (std::size_t s : {std::size_t(0), std::size_t(1)}) {
        MomentReport report = second_moment(result.snapshots[s]);
        CHECK(report.second_moment == Catch::Approx(M_PI * std::exp(-2.0 * report.t)));
        CHECK(report.per_level.size() == 1);
        CHECK(report.mean_field.at(1) == result.snapshots[s].fields[0].at(1));
    }
}

TEST_CASE("diagonal second moment matches the variance series", "[solver]") {
    const double sigma = 0.5;
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, 2);
    for (auto noise : {NoiseSpec::white(1.0), NoiseSpec::ornstein_uhlenbeck(1.0, 1.0)}) {
        SystemOperators ops = heat_system(noise, CouplingOperator::diagonal(sigma));
        SolveResult result = solve_diagonal(ops, u0, 4, 8, 512);
        for (std::size_t node : {std::size_t(256), std::size_t(512)}) {
            double t = result.grid.node(node);
            double S = sigma * sigma * variance_partial_sum(noise, 8, t);
            double expected = M_PI * std::exp(-2.0 * t) * truncated_exponential_series(S, 4);
            CHECK(result.second_moment_at(node) == Catch::Approx(expected).epsilon(5e-3));
            MomentReport report = moment_report_at(result, node);
            CHECK(report.second_moment == Catch::Approx(result.second_moment_at(node)));
            CHECK(report.per_level[1] == Catch::Approx(M_PI * std::exp(-2.0 * t) * S).epsilon(5e-3));
        }
    }
}

TEST_CASE("realizations: mean, second moment, deterministic contraction", "[solver]") {
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, 2);
    SystemOperators ops = heat_system(NoiseSpec::ornstein_uhlenbeck(1.0, 1.0), CouplingOperator::diagonal(0.5));
    SolveResult result = solve_diagonal(ops, u0, 3, 4, 256, {256});
    const ChaosCoefficients& coeffs = result.snapshots[0];
    MomentReport exact = second_moment(coeffs);

    McMomentStats stats = mc_moment_stats(coeffs, 20000, 31, 0, 2);
    CHECK(std::fabs(stats.mean_sq - exact.second_moment) <= 3.0 * stats.se_sq);
    double mean_err = h_norm(stats.mean_field - coeffs.fields[0]);
    CHECK(mean_err < 0.05 * h_norm(coeffs.fields[0]) + 0.02);

    // all-zero draws: H_1(0) = 0, H_2(0) = -1, H_3(0) = 0
    GaussianSample zero;
    zero.max_order = 4;
    zero.max_dimension = 1;
    zero.values.assign(4, 0.0);
    SpectralField at_zero = sample_realization(coeffs, zero);
    SpectralField expected(2);
    for (std::size_t a = 0; a < coeffs.size(); ++a) {
        const MultiIndex& alpha = coeffs.truncation->members[a];
        double factor = 1.0;
        for (const auto& e : alpha.entries()) {
            double fact = 1.0;
            for (int j = 2; j <= e.count; ++j) fact *= static_cast<double>(j);
            factor *= hermite(e.count, 0.0) / std::sqrt(fact);
        }
        SpectralField term = coeffs.fields[a];
        term *= factor;
        expected += term;
    }
    CHECK(h_norm(at_zero - expected) < 1e-13);

    GaussianSample small = sample_gaussians(2, 1, 3);
    CHECK_THROWS_AS(sample_realization(coeffs, small), std::invalid_argument);
}

TEST_CASE("truncation tails at a fixed time", "[solver]") {
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, 2);
    NoiseSpec noise = NoiseSpec::white(1.0);
    SystemOperators ops = heat_system(noise, CouplingOperator::diagonal(0.5));
    SolveResult ref = solve_diagonal(ops, u0, 4, 8, 512, {512});
    const ChaosCoefficients& coeffs = ref.snapshots[0];

    TruncationTails same = truncation_tail(coeffs, 4, 8, 1);
    CHECK(same.level == 0.0);
    CHECK(same.order == 0.0);
    CHECK(same.dimension == 0.0);

    TruncationTails tails = truncation_tail(coeffs, 2, 4, 1);
    CHECK(tails.dimension == 0.0);  // single noise
    // diagonal closed form: level tail = pi e^{-2} (S^3/3! + S^4/4!)
    double S = 0.25 * variance_partial_sum(noise, 8, 1.0);
    double expected_level = M_PI * std::exp(-2.0) * (std::pow(S, 3) / 6.0 + std::pow(S, 4) / 24.0);
    CHECK(tails.level == Catch::Approx(expected_level).epsilon(1e-2));

    CHECK_THROWS_AS(truncation_tail(coeffs, 5, 8, 1), std::invalid_argument);
}

TEST_CASE("tail series agree with snapshot tails", "[solver]") {
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, 2);
    SystemOperators ops = heat_system(NoiseSpec::ornstein_uhlenbeck(1.0, 1.0), CouplingOperator::diagonal(0.5));
    TimeGrid grid(1.0, 256);
    SolveOptions opts;
    opts.order_breaks = {4};
    opts.snapshot_nodes = {256};
    SolveResult ref = solve_propagator_detailed(ops, u0, enumerate_truncation(4, 8, 1), grid, {}, opts);

    TailSeries series = tail_series(ref, 2, 4, 1);
    TruncationTails from_series = series.end();
    TruncationTails from_snapshot = truncation_tail(ref.snapshots[0], 2, 4, 1);
    CHECK(from_series.level == Catch::Approx(from_snapshot.level).epsilon(1e-12));
    CHECK(from_series.order == Catch::Approx(from_snapshot.order).epsilon(1e-12));
    CHECK(from_series.dimension == from_snapshot.dimension);

    CHECK_THROWS_AS(tail_series(ref, 2, 3, 1), std::invalid_argument);  // 3 is not a histogram edge
}

TEST_CASE("bound arithmetic", "[solver]") {
    ErrorBudget b;
    b.T = 1.0;
    b.C_A = 1.0;
    b.delta_A = 1.0;
    b.C_o = 1.0;
    b.C_B = 1.0;
    b.C_1B = 1.0;
    b.Cbar_B = 1.0;
    b.noise_norms = {1.0};
    b.coupling_norms = {1.0};
    b.coupling_norms_h2 = {1.0};
    b.rates = RateExponents{1.0, 2.0, 3.0, 4.0, false};
    b.I0 = 1.0;
    b.I_H = 1.0;
    b.I_H2 = 1.0;
    b.C02 = 1.0;

    CHECK(moment_bound(b) == Catch::Approx(std::exp(2.0)));
    ErrorBudget zero = b;
    zero.I0 = 0.0;
    CHECK(moment_bound(zero) == 0.0);

    CHECK(level_tail_bound(b, 0) == Catch::Approx(std::exp(2.0)));
    CHECK(level_tail_bound(b, 3) == Catch::Approx(std::exp(2.0) / 24.0));
    CHECK(level_tail_bound(b, 60) < 1e-60);

    // endpoint first term scales as T^3/n^3 for these exponents
    BoundPair p4 = order_tail_bounds(b, 4);
    BoundPair p8 = order_tail_bounds(b, 8);
    double smooth4 = std::exp(2.0) / 4.0;
    CHECK(p4.uniform == Catch::Approx(std::exp(2.0) / 4.0 + smooth4));
    CHECK(p4.endpoint == Catch::Approx(std::exp(2.0) / 64.0 + smooth4));
    CHECK((p4.endpoint - smooth4) / (p8.endpoint - std::exp(2.0) / 8.0) == Catch::Approx(8.0));

    // white sentinel removes the endpoint first term
    ErrorBudget white = b;
    white.rates = RateExponents{1.0, 2.0, 0.0, 0.0, true};
    BoundPair wp = order_tail_bounds(white, 4);
    CHECK(wp.endpoint == Catch::Approx(smooth4));

    CHECK(dimension_tail_bound(b, 1) == 0.0);  // single noise in the list
    ErrorBudget two = b;
    two.noise_norms = {1.0, 2.0};
    two.coupling_norms = {1.0, 0.5};
    CHECK(two.eps(1) == Catch::Approx(1.0));
    CHECK(dimension_tail_bound(two, 1) == Catch::Approx(std::exp(2.0)));
    CHECK(dimension_tail_bound(two, 2) == 0.0);

    BoundPair total = total_error_bounds(b, 3, 4, 1);
    CHECK(total.uniform == Catch::Approx(level_tail_bound(b, 3) + p4.uniform));
    CHECK(total.endpoint == Catch::Approx(level_tail_bound(b, 3) + p4.endpoint));

    MultistepBound mb = multistep_error_bound(b, 2, 4, 1, 0.5);
    double level = std::pow(0.5, 2) / 6.0;
    double endpoint_term = std::pow(0.5, 2.0) / std::pow(4.0, 3.0);
    CHECK(mb.printed == Catch::Approx(level + endpoint_term + (0.5 + 1.0) / 4.0));
    CHECK(mb.tau_variant == Catch::Approx(level + endpoint_term + std::pow(0.5, 2.0) / 4.0));
}

TEST_CASE("budget construction from operators", "[solver]") {
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, 8);
    SystemOperators ops = heat_system(NoiseSpec::ornstein_uhlenbeck(1.0, 1.0), CouplingOperator::diagonal(0.5));
    ErrorBudget b = make_error_budget(ops, u0, 1.0);
    CHECK(b.C_A == 1.0);
    CHECK(b.delta_A == 1.0);
    CHECK(b.C_o == 1.0);
    CHECK(b.C_B == Catch::Approx(4.0 * 0.25));  // (1+sqrt(bT))^2 sigma^2
    CHECK(b.I_H == Catch::Approx(M_PI));
    CHECK(*b.I_H2 == Catch::Approx(4.0 * M_PI));
    CHECK(b.rates.gamma1 == 4.0);
    CHECK(b.eps(1) == 0.0);
}

TEST_CASE("multistep: single step equals the one-step closed form", "[solver]") {
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, 2);
    for (auto noise : {NoiseSpec::white(1.0), NoiseSpec::ornstein_uhlenbeck(1.0, 1.0)}) {
        SystemOperators ops = heat_system(noise, CouplingOperator::diagonal(0.5));
        MultistepOptions opts;
        opts.step_subintervals = 256;
        opts.mc_samples = 0;
        MultistepResult result = multistep_solve(ops, u0, 3, 8, 1, 1, 1.0, opts);
        REQUIRE(result.steps.size() == 2);
        double S = 0.25 * variance_partial_sum(noise, 8, 1.0);
        double expected = M_PI * std::exp(-2.0) * truncated_exponential_series(S, 3);
        CHECK(result.steps[1].exact_moment == Catch::Approx(expected).epsilon(1e-14));
    }
}

TEST_CASE("multistep: sampled transfer equals the explicit chaos contraction", "[solver]") {
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, 2);
    SystemOperators ops = heat_system(NoiseSpec::ornstein_uhlenbeck(1.0, 1.0), CouplingOperator::diagonal(0.5));
    const int N = 3, n = 4;
    const double tau = 0.5;
    auto data = detail::diagonal_step_data(ops, N, n, 1, tau, 128);
    TruncationSet trunc = enumerate_truncation(N, n, 1);
    TimeGrid step_grid(tau, 128);
    NoiseDiscretization disc(ops.noises[0].with_horizon(tau), step_grid, n);
    for (std::uint64_t sample : {0ULL, 5ULL, 17ULL}) {
        for (std::uint64_t step : {1ULL, 2ULL}) {
            double fast = detail::diagonal_transfer_sample(data, N, 42, sample, step);
            GaussianSample g = sample_gaussians(n, 1, 42, sample, step);
            double explicit_sum = 0.0;
            for (const auto& alpha : trunc.members) {
                double coeff = std::pow(0.5, alpha.length());
                for (const auto& e : alpha.entries()) {
                    double fact = 1.0;
                    for (int j = 2; j <= e.count; ++j) fact *= static_cast<double>(j);
                    coeff *= std::pow(disc.integral_at_node(e.k, 128), e.count) / std::sqrt(fact);
                }
                explicit_sum += coeff * cameron_martin_eval(alpha, g);
            }
            CHECK(fast == Catch::Approx(explicit_sum).margin(1e-12));
        }
    }
}

TEST_CASE("multistep: moment growth and MC agreement", "[solver]") {
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, 2);
    SystemOperators ops = heat_system(NoiseSpec::ornstein_uhlenbeck(1.0, 1.0), CouplingOperator::diagonal(0.5));
    MultistepOptions opts;
    opts.step_subintervals = 128;
    opts.mc_samples = 10000;
    opts.seed = 11;
    opts.threads = 2;
    const int K = 4;
    MultistepResult result = multistep_solve(ops, u0, 3, 16, 1, K, 1.0, opts);
    double tau = result.tau;
    SystemOperators tau_ops = ops;
    tau_ops.noises[0] = ops.noises[0].with_horizon(tau);
    ErrorBudget budget = make_error_budget(tau_ops, u0, tau);
    double growth = std::exp((budget.C_A + budget.C_B) * tau);
    for (int j = 1; j <= K; ++j) {
        const auto& step = result.steps[static_cast<std::size_t>(j)];
        const auto& prev = result.steps[static_cast<std::size_t>(j - 1)];
        CHECK(step.exact_moment <= growth * prev.exact_moment * (1.0 + 1e-12));
        CHECK(std::fabs(step.mc_moment - step.exact_moment) <= 3.0 * step.mc_se);
    }
}

TEST_CASE("multistep: general-coupling path matches the diagonal fast path", "[solver]") {
    // a diagonal coupling forced through the generic per-sample solver
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, 2);
    SystemOperators ops = heat_system(NoiseSpec::white(1.0), CouplingOperator::diagonal(0.5));
    SystemOperators general = ops;
    general.couplings[0] = CouplingOperator::multiplier(SpectralField::constant(0.5, 2));

    MultistepOptions fast;
    fast.step_subintervals = 64;
    fast.mc_samples = 400;
    fast.seed = 3;
    MultistepOptions generic = fast;
    generic.want_exact = false;

    MultistepResult a = multistep_solve(ops, u0, 2, 4, 1, 2, 1.0, fast);
    MultistepResult b = multistep_solve(general, u0, 2, 4, 1, 2, 1.0, generic);
    CHECK(b.steps[2].mc_moment == Catch::Approx(a.steps[2].mc_moment).epsilon(2e-3));

    CHECK_THROWS_AS(multistep_solve(general, u0, 2, 4, 1, 2, 1.0, fast), std::invalid_argument);
    CHECK_THROWS_AS(multistep_solve(ops, u0, 2, 4, 1, 0, 1.0, fast), std::invalid_argument);
}

TEST_CASE("multistep exact error decreases with richer truncation", "[solver]") {
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, 2);
    SystemOperators ops = heat_system(NoiseSpec::ornstein_uhlenbeck(1.0, 1.0), CouplingOperator::diagonal(0.5));
    double e2 = multistep_error_exact(ops, u0, 2, 16, 5, 64, 1, 4, 1.0, 128);
    double e3 = multistep_error_exact(ops, u0, 3, 16, 5, 64, 1, 4, 1.0, 128);
    CHECK(e2 > 0.0);
    CHECK(e3 > 0.0);
    CHECK(e3 < e2);
    CHECK_THROWS_AS(multistep_error_exact(ops, u0, 3, 16, 2, 64, 1, 4, 1.0, 128), std::invalid_argument);
}

TEST_CASE("budget with forcing terms", "[solver]") {
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, 4);
    SystemOperators ops = heat_system(NoiseSpec::white(2.0), CouplingOperator::diagonal(0.5));
    ForcingTerms forcing;
    forcing.drift = SpectralField::constant(0.3, 4);
    forcing.noise_offsets = {SpectralField::harmonic_sin(2, 0.2, 4)};
    ErrorBudget b = make_error_budget(ops, u0, 2.0, forcing);
    CHECK(b.C_o == 3.0);
    double f_part = 2.0 / 1.0 * 2.0 * sobolev_norm_sq(*forcing.drift, -1.0);
    double g_part = 1.0 * 2.0 * h_norm_sq(forcing.noise_offsets[0]);
    CHECK(b.I0 == Catch::Approx(M_PI + f_part + g_part));
}
