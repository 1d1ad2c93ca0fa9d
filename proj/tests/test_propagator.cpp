#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "chaospde/propagator.hpp"

using namespace chaospde;

namespace {

SystemOperators heat_system(NoiseSpec noise, CouplingOperator coupling) {
    SystemOperators ops;
    ops.generator = SpectralGenerator{0.0};
    ops.noises = {std::move(noise)};
    ops.couplings = {std::move(coupling)};
    return ops;
}

}  // namespace

TEST_CASE("zero-length truncation reproduces the heat flow", "[propagator]") {
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, 4);
    TimeGrid grid(1.0, 64);
    SystemOperators ops = heat_system(NoiseSpec::white(1.0), CouplingOperator::diagonal(0.5));
    ChaosTrajectory traj = solve_propagator(ops, u0, enumerate_truncation(0, 1, 1), grid);
    REQUIRE(traj.fields.size() == 1);
    for (std::size_t i = 0; i < grid.nodes(); ++i) {
        SpectralField expected = semigroup_apply(ops.generator, grid.node(i), u0);
        for (int q = -4; q <= 4; ++q) CHECK(std::abs(traj.fields[0][i].at(q) - expected.at(q)) < 1e-14);
    }
}

TEST_CASE("mean coefficient equals the semigroup flow exactly", "[propagator]") {
    SpectralField u0 = SpectralField::harmonic_sin(1, 0.7, 8);
    u0 += SpectralField::harmonic_cos(3, 0.2, 8);
    TimeGrid grid(1.0, 128);
    SystemOperators ops = heat_system(NoiseSpec::ornstein_uhlenbeck(1.0, 1.0), CouplingOperator::diagonal(0.5));
    SolveOptions opts;
    opts.snapshot_nodes = {64, 128};
    SolveResult result = solve_propagator_detailed(ops, u0, enumerate_truncation(2, 4, 1), grid, {}, opts);
    for (std::size_t s = 0; s < 2; ++s) {
        SpectralField expected = semigroup_apply(ops.generator, result.snapshots[s].t, u0);
        for (int q = -8; q <= 8; ++q)
            CHECK(std::abs(result.snapshots[s].fields[0].at(q) - expected.at(q)) < 1e-14);
    }
}

TEST_CASE("diagonal closed form across noise kinds", "[propagator]") {
    // u_alpha(t) = Phi_t u0 * sigma^{|alpha|} prod_k I_k(t)^{alpha_k} / sqrt(alpha_k!)
    const double sigma = 0.5;
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, 2);
    TimeGrid grid(1.0, 1024);
    for (auto noise : {NoiseSpec::white(1.0), NoiseSpec::ornstein_uhlenbeck(1.0, 1.0), NoiseSpec::fractional(0.75, 1.0)}) {
        SystemOperators ops = heat_system(noise, CouplingOperator::diagonal(sigma));
        TruncationSet trunc = enumerate_truncation(4, 8, 1);
        NoiseDiscretization disc(noise, grid, 8);
        for (bool dense : {false, true}) {
            SolveOptions opts;
            opts.force_dense = dense;
            opts.snapshot_nodes = {512, 1024};
            SolveResult result = solve_propagator_detailed(ops, u0, trunc, grid, {}, opts);
            CHECK(result.scalar_path == !dense);
            for (std::size_t snap = 0; snap < 2; ++snap) {
                std::size_t node = opts.snapshot_nodes[snap];
                SpectralField base = semigroup_apply(ops.generator, grid.node(node), u0);
                for (std::size_t a = 0; a < trunc.members.size(); ++a) {
                    const MultiIndex& alpha = trunc.members[a];
                    double c = std::pow(sigma, alpha.length());
                    for (const auto& e : alpha.entries()) {
                        double fact = 1.0;
                        for (int j = 2; j <= e.count; ++j) fact *= static_cast<double>(j);
                        c *= std::pow(disc.integral_at_node(e.k, node), e.count) / std::sqrt(fact);
                    }
                    SpectralField expected = base;
                    expected *= c;
                    SpectralField diff = result.snapshots[snap].fields[a] - expected;
                    CHECK(h_norm(diff) <= 1e-4 * (1.0 + h_norm(expected)));
                }
            }
        }
    }
}

TEST_CASE("first-order coefficient matches dense quadrature", "[propagator]") {
    // u_{eps_k}(t) = int_0^t Phi_{t-s} h Phi_s u0 (K m_k)(s) ds
    const int Q = 6;
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, Q);
    SpectralField hfield = SpectralField::constant(1.0, Q);
    hfield += SpectralField::harmonic_cos(1, 0.3, Q);
    NoiseSpec noise = NoiseSpec::ornstein_uhlenbeck(1.0, 1.0);
    SystemOperators ops = heat_system(noise, CouplingOperator::multiplier(hfield));

    TimeGrid solve_grid(1.0, 512);
    SolveOptions opts;
    opts.snapshot_nodes = {512};
    SolveResult result = solve_propagator_detailed(ops, u0, enumerate_truncation(1, 4, 1), solve_grid, {}, opts);

    TimeGrid fine(1.0, 4096);
    for (int k = 1; k <= 4; ++k) {
        SpectralField oracle(Q);
        std::vector<SpectralField> integrand(fine.nodes(), SpectralField(Q));
        for (std::size_t i = 0; i < fine.nodes(); ++i) {
            double s = fine.node(i);
            SpectralField term = apply_coupling(ops.couplings[0], semigroup_apply(ops.generator, s, u0));
            term = semigroup_apply(ops.generator, 1.0 - s, term);
            term *= filtered_basis(noise, k, s);
            integrand[i] = term;
        }
        for (int q = -Q; q <= Q; ++q) {
            std::vector<double> re(fine.nodes()), im(fine.nodes());
            for (std::size_t i = 0; i < fine.nodes(); ++i) {
                re[i] = integrand[i].at(q).real();
                im[i] = integrand[i].at(q).imag();
            }
            oracle.at(q) = {simpson_prefix(fine, re, 4096), simpson_prefix(fine, im, 4096)};
        }
        const auto& members = result.truncation->members;
        std::size_t idx = 0;
        for (std::size_t a = 0; a < members.size(); ++a)
            if (members[a] == MultiIndex::unit(k, 1)) idx = a;
        SpectralField diff = result.snapshots[0].fields[idx] - oracle;
        CHECK(h_norm(diff) < 1e-4);
    }
}

TEST_CASE("grid refinement is second order", "[propagator]") {
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, 4);
    SpectralField hfield = SpectralField::constant(1.0, 4);
    hfield += SpectralField::harmonic_cos(1, 0.3, 4);
    SystemOperators ops = heat_system(NoiseSpec::white(1.0), CouplingOperator::multiplier(hfield));
    TruncationSet trunc = enumerate_truncation(2, 4, 1);

    auto moment_at = [&](std::size_t M) {
        TimeGrid grid(1.0, M);
        SolveResult r = solve_propagator_detailed(ops, u0, trunc, grid, {}, {});
        return r.second_moment_at(M);
    };
    double d1 = moment_at(64) - moment_at(128);
    double d2 = moment_at(128) - moment_at(256);
    CHECK(d1 / d2 >= 3.5);
    CHECK(d1 / d2 <= 4.5);
}

TEST_CASE("per-level energies obey the factorial bound", "[propagator]") {
    // multiplier coupling h = 1 + 0.3 cos x, white noise: C_B = 1.69
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, 8);
    SpectralField hfield = SpectralField::constant(1.0, 8);
    hfield += SpectralField::harmonic_cos(1, 0.3, 8);
    SystemOperators ops = heat_system(NoiseSpec::white(1.0), CouplingOperator::multiplier(hfield));
    TimeGrid grid(1.0, 256);
    SolveResult result = solve_propagator_detailed(ops, u0, enumerate_truncation(4, 8, 1), grid, {}, {});

    const double C_B = 1.69;
    const double u0_sq = h_norm_sq(u0);
    for (int k = 0; k <= 4; ++k) {
        double fact = 1.0;
        for (int j = 1; j <= k; ++j) fact *= static_cast<double>(j);
        double bound = std::exp(1.0) * std::pow(C_B, k) / fact * u0_sq;
        for (std::size_t i = 0; i < grid.nodes(); ++i)
            CHECK(result.level_energy[static_cast<std::size_t>(k)][i] <= bound * (1.0 + 1e-9));
    }
}

TEST_CASE("parallel solve is bit-identical to sequential", "[propagator]") {
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, 6);
    SpectralField hfield = SpectralField::constant(1.0, 6);
    hfield += SpectralField::harmonic_cos(2, 0.4, 6);
    for (auto coupling : {CouplingOperator::diagonal(0.5), CouplingOperator::multiplier(hfield)}) {
        SystemOperators ops = heat_system(NoiseSpec::ornstein_uhlenbeck(0.5, 1.0), coupling);
        TimeGrid grid(1.0, 128);
        TruncationSet trunc = enumerate_truncation(3, 6, 1);
        SolveOptions seq, par;
        seq.threads = 1;
        par.threads = 4;
        seq.snapshot_nodes = par.snapshot_nodes = {128};
        SolveResult a = solve_propagator_detailed(ops, u0, trunc, grid, {}, seq);
        SolveResult b = solve_propagator_detailed(ops, u0, trunc, grid, {}, par);
        for (std::size_t k = 0; k < a.level_energy.size(); ++k)
            for (std::size_t i = 0; i < grid.nodes(); ++i)
                CHECK(a.level_energy[k][i] == b.level_energy[k][i]);
        for (std::size_t idx = 0; idx < a.alpha_norms.size(); ++idx) {
            CHECK(a.alpha_norms[idx].sup_sq == b.alpha_norms[idx].sup_sq);
            CHECK(a.alpha_norms[idx].end_sq == b.alpha_norms[idx].end_sq);
        }
        for (std::size_t a_idx = 0; a_idx < trunc.members.size(); ++a_idx)
            for (int q = -6; q <= 6; ++q)
                CHECK(a.snapshots[0].fields[a_idx].at(q) == b.snapshots[0].fields[a_idx].at(q));
    }
}

TEST_CASE("trajectory snapshots agree with snapshot fields", "[propagator]") {
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, 4);
    SystemOperators ops = heat_system(NoiseSpec::white(1.0), CouplingOperator::diagonal(0.5));
    TimeGrid grid(1.0, 64);
    SolveOptions opts;
    opts.keep_trajectory = true;
    opts.snapshot_nodes = {32};
    SolveResult result = solve_propagator_detailed(ops, u0, enumerate_truncation(2, 4, 1), grid, {}, opts);
    ChaosCoefficients from_traj = result.trajectory->at_node(32);
    for (std::size_t a = 0; a < from_traj.fields.size(); ++a)
        for (int q = -4; q <= 4; ++q)
            CHECK(from_traj.fields[a].at(q) == result.snapshots[0].fields[a].at(q));
}

TEST_CASE("input validation", "[propagator]") {
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, 4);
    SystemOperators ops = heat_system(NoiseSpec::white(1.0), CouplingOperator::diagonal(0.5));
    TimeGrid grid(1.0, 64);
    CHECK_THROWS_AS(solve_propagator(ops, u0, enumerate_truncation(1, 2, 2), grid), std::invalid_argument);
    TimeGrid wrong(2.0, 64);
    CHECK_THROWS_AS(solve_propagator(ops, u0, enumerate_truncation(1, 2, 1), wrong), std::invalid_argument);
    SolveOptions tiny;
    tiny.keep_trajectory = true;
    tiny.field_scalar_limit = 10;
    CHECK_THROWS_AS(solve_propagator_detailed(ops, u0, enumerate_truncation(1, 2, 1), grid, {}, tiny), GuardError);
}

TEST_CASE("constant drift forcing is integrated exactly", "[propagator]") {
    // mean equation per mode: u' = a(q) u + F_q, closed form vs the integrator
    const int Q = 3;
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, Q);
    u0 += SpectralField::constant(0.5, Q);
    SpectralField F = SpectralField::constant(0.2, Q);
    F += SpectralField::harmonic_cos(2, 0.1, Q);
    SystemOperators ops = heat_system(NoiseSpec::white(1.0), CouplingOperator::diagonal(0.5));
    ForcingTerms forcing;
    forcing.drift = F;
    TimeGrid grid(1.0, 128);
    SolveOptions opts;
    opts.snapshot_nodes = {64, 128};
    SolveResult result = solve_propagator_detailed(ops, u0, enumerate_truncation(1, 2, 1), grid, forcing, opts);
    CHECK(!result.scalar_path);
    for (std::size_t s = 0; s < 2; ++s) {
        double t = result.snapshots[s].t;
        for (int q = -Q; q <= Q; ++q) {
            double a = ops.generator.symbol(q);
            std::complex<double> expected =
                q == 0 ? u0.at(0) + F.at(0) * t
                       : u0.at(q) * std::exp(a * t) + F.at(q) * (std::exp(a * t) - 1.0) / a;
            CHECK(std::abs(result.snapshots[s].fields[0].at(q) - expected) < 1e-13);
        }
    }
}

TEST_CASE("noise offsets feed the first level", "[propagator]") {
    // u_{eps_k}(t) = int_0^t Phi_{t-s} (B u_(0)(s) + G) (K m_k)(s) ds
    const int Q = 3;
    SpectralField u0 = SpectralField::harmonic_sin(1, 1.0, Q);
    SpectralField G = SpectralField::harmonic_cos(1, 0.4, Q);
    NoiseSpec noise = NoiseSpec::ornstein_uhlenbeck(1.0, 1.0);
    SystemOperators ops = heat_system(noise, CouplingOperator::diagonal(0.5));
    ForcingTerms forcing;
    forcing.noise_offsets = {G};
    TimeGrid grid(1.0, 512);
    SolveOptions opts;
    opts.snapshot_nodes = {512};
    SolveResult result = solve_propagator_detailed(ops, u0, enumerate_truncation(1, 2, 1), grid, forcing, opts);

    TimeGrid fine(1.0, 4096);
    for (int k = 1; k <= 2; ++k) {
        SpectralField oracle(Q);
        std::vector<SpectralField> integrand(fine.nodes(), SpectralField(Q));
        for (std::size_t i = 0; i < fine.nodes(); ++i) {
            double s = fine.node(i);
            SpectralField term = semigroup_apply(ops.generator, s, u0);
            term *= 0.5;
            term += G;
            term = semigroup_apply(ops.generator, 1.0 - s, term);
            term *= filtered_basis(noise, k, s);
            integrand[i] = term;
        }
        for (int q = -Q; q <= Q; ++q) {
            std::vector<double> re(fine.nodes()), im(fine.nodes());
            for (std::size_t i = 0; i < fine.nodes(); ++i) {
                re[i] = integrand[i].at(q).real();
                im[i] = integrand[i].at(q).imag();
            }
            oracle.at(q) = {simpson_prefix(fine, re, 4096), simpson_prefix(fine, im, 4096)};
        }
        std::size_t idx = static_cast<std::size_t>(k);  // members: (0), eps_1, eps_2
        SpectralField diff = result.snapshots[0].fields[idx] - oracle;
        CHECK(h_norm(diff) < 1e-4);
    }
}
