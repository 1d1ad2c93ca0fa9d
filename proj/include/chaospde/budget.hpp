#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "chaospde/noise.hpp"
#include "chaospde/propagator.hpp"
#include "chaospde/spectral.hpp"

namespace chaospde {

// Every constant feeding the theoretical error bounds, surfaced explicitly.
struct ErrorBudget {
    double T = 1.0;
    double C_A = 1.0;      // parabolicity constant of the generator
    double delta_A = 1.0;  // parabolicity margin
    double C_o = 1.0;      // 1 without forcing, 3 with forcing

    std::vector<double> noise_norms;        // operator norms of the representation operators
    std::vector<double> coupling_norms;     // H operator norms of the couplings
    std::vector<double> coupling_norms_h2;  // H^2 operator norms of the couplings

    double C_B = 0.0;    // sum of (noise_norm * coupling_norm)^2
    double C_1B = 0.0;   // sum of (noise_norm * coupling_norm_h2)^2
    double Cbar_B = 0.0; // max(C_B, C_1B)

    RateExponents rates;  // worst case over the noise list

    double I0 = 0.0;                  // initial data functional
    double I_H = 0.0;                 // ||u0||_H^2
    std::optional<double> I_H2;       // ||u0||_{H^2}^2
    double C02 = 1.0;                 // ||A v||_H <= C02 ||v||_{H^2}

    // Tail of the coupling series beyond dimension r; zero once the finite
    // noise list is exhausted.
    double eps(int r) const {
        double acc = 0.0;
        for (std::size_t l = static_cast<std::size_t>(r); l < noise_norms.size(); ++l)
            acc += noise_norms[l] * noise_norms[l] * coupling_norms[l] * coupling_norms[l];
        return acc;
    }
};

inline RateExponents combined_rate_exponents(const std::vector<NoiseSpec>& noises) {
    RateExponents out;
    bool first = true;
    bool all_exact = true;
    bool first_ep = true;
    for (const auto& spec : noises) {
        RateExponents r = rate_exponents(spec);
        if (first) {
            out.delta = r.delta;
            out.gamma = r.gamma;
            first = false;
        } else {
            out.delta = std::max(out.delta, r.delta);
            out.gamma = std::min(out.gamma, r.gamma);
        }
        if (!r.endpoint_exact_zero) {
            all_exact = false;
            if (first_ep) {
                out.delta1 = r.delta1;
                out.gamma1 = r.gamma1;
                first_ep = false;
            } else {
                out.delta1 = std::max(out.delta1, r.delta1);
                out.gamma1 = std::min(out.gamma1, r.gamma1);
            }
        }
    }
    out.endpoint_exact_zero = all_exact;
    return out;
}

inline ErrorBudget make_error_budget(const SystemOperators& ops, const SpectralField& u0, double T,
                                     const ForcingTerms& forcing = {}, int h2_cutoff = 64) {
    if (ops.couplings.size() > ops.noises.size())
        throw std::invalid_argument("make_error_budget: more couplings than noises");
    ErrorBudget b;
    b.T = T;
    b.C_A = ops.generator.parabolicity_constant();
    b.delta_A = ops.generator.parabolicity_margin();
    b.C_o = forcing.empty() ? 1.0 : 3.0;
    for (std::size_t l = 0; l < ops.couplings.size(); ++l) {
        double kn = operator_norm_bound(ops.noises[l]);
        double cn = ops.couplings[l].norm_h();
        double cn2 = ops.couplings[l].norm_h2(h2_cutoff);
        b.noise_norms.push_back(kn);
        b.coupling_norms.push_back(cn);
        b.coupling_norms_h2.push_back(cn2);
        b.C_B += kn * kn * cn * cn;
        b.C_1B += kn * kn * cn2 * cn2;
    }
    b.Cbar_B = std::max(b.C_B, b.C_1B);
    b.rates = combined_rate_exponents(
        std::vector<NoiseSpec>(ops.noises.begin(), ops.noises.begin() + static_cast<long>(ops.couplings.size())));
    b.I_H = h_norm_sq(u0);
    b.I_H2 = sobolev_norm_sq(u0, 2.0);
    b.I0 = b.I_H;
    if (forcing.drift.has_value())
        b.I0 += 2.0 / b.delta_A * T * sobolev_norm_sq(*forcing.drift, -1.0);
    for (std::size_t l = 0; l < forcing.noise_offsets.size() && l < b.noise_norms.size(); ++l)
        b.I0 += b.noise_norms[l] * b.noise_norms[l] * T * h_norm_sq(forcing.noise_offsets[l]);
    b.C02 = ops.generator.h2_control_constant(std::max(h2_cutoff, u0.cutoff()));
    return b;
}

// sup_t E||u(t)||_H^2 <= C_o e^{(C_A + C_B) T} I0.
inline double moment_bound(const ErrorBudget& b) { return b.C_o * std::exp((b.C_A + b.C_B) * b.T) * b.I0; }

// Energy of a single chaos level k (forcing-free form):
//   sum_{|alpha|=k} ||u_alpha(t)||^2 <= C_o e^{C_A T} (C_B T)^k / k! * ||u0||^2.
inline double level_energy_bound(const ErrorBudget& b, int k) {
    if (k < 0) throw std::invalid_argument("level_energy_bound: k must be >= 0");
    double term = 1.0;
    for (int j = 1; j <= k; ++j) term *= b.C_B * b.T / static_cast<double>(j);
    return b.C_o * std::exp(b.C_A * b.T) * term * b.I_H;
}

// Tail beyond chaos length N:
//   sup_t E||u - u_N||^2 <= (C_B T)^{N+1}/(N+1)! e^{(C_A + C_B) T} ||u0||^2.
inline double level_tail_bound(const ErrorBudget& b, int N) {
    if (N < 0) throw std::invalid_argument("level_tail_bound: N must be >= 0");
    double term = 1.0;
    for (int j = 1; j <= N + 1; ++j) term *= b.C_B * b.T / static_cast<double>(j);
    return term * std::exp((b.C_A + b.C_B) * b.T) * b.I_H;
}

struct BoundPair {
    double uniform = 0.0;
    double endpoint = 0.0;
};

// Tail beyond basis order n at fixed length budget; uniform-in-time and
// endpoint variants. The endpoint first term vanishes identically for white
// noise (exact-zero sentinel).
inline BoundPair order_tail_bounds(const ErrorBudget& b, int n) {
    if (n < 1) throw std::invalid_argument("order_tail_bounds: n must be >= 1");
    if (!b.I_H2.has_value()) throw std::invalid_argument("order_tail_bounds: budget lacks the H^2 norm of u0");
    const double pre = b.C_1B * std::exp((b.C_A + b.Cbar_B) * b.T);
    const double smooth_term =
        b.C02 * b.C_1B * std::pow(b.T, b.rates.delta + 2.0) / std::pow(n, b.rates.gamma - 1.0) * *b.I_H2;
    BoundPair out;
    out.uniform = pre * (b.C_B * std::pow(b.T, b.rates.delta) / std::pow(n, b.rates.gamma - 1.0) * b.I_H + smooth_term);
    double endpoint_first = 0.0;
    if (!b.rates.endpoint_exact_zero)
        endpoint_first = b.C_B * std::pow(b.T, b.rates.delta1) / std::pow(n, b.rates.gamma1 - 1.0) * b.I_H;
    out.endpoint = pre * (endpoint_first + smooth_term);
    return out;
}

// Tail beyond noise dimension r:
//   sup_t E||u_N^n - u_N^{n,r}||^2 <= eps(r) T e^{(C_A + C_B) T} ||u0||^2.
inline double dimension_tail_bound(const ErrorBudget& b, int r) {
    if (r < 0) throw std::invalid_argument("dimension_tail_bound: r must be >= 0");
    return b.eps(r) * b.T * std::exp((b.C_A + b.C_B) * b.T) * b.I_H;
}

// Total truncation error bound: sum of the level, order, and dimension parts.
inline BoundPair total_error_bounds(const ErrorBudget& b, int N, int n, int r) {
    BoundPair order = order_tail_bounds(b, n);
    double level = level_tail_bound(b, N);
    double dimension = dimension_tail_bound(b, r);
    return {level + order.uniform + dimension, level + order.endpoint + dimension};
}

struct MultistepBound {
    double printed = 0.0;      // middle term (tau^delta + 1)/n^{gamma-1}, as printed
    double tau_variant = 0.0;  // middle term tau^{delta+1}/n^{gamma-1}
};

// Multistep error bound over a uniform partition with step tau.
inline MultistepBound multistep_error_bound(const ErrorBudget& b, int N, int n, int r, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("multistep_error_bound: tau must be positive");
    if (n < 1) throw std::invalid_argument("multistep_error_bound: n must be >= 1");
    if (!b.I_H2.has_value()) throw std::invalid_argument("multistep_error_bound: budget lacks the H^2 norm of u0");
    double level = 1.0;
    for (int j = 1; j <= N; ++j) level *= tau * b.C_B;
    double fact = 1.0;
    for (int j = 2; j <= N + 1; ++j) fact *= static_cast<double>(j);
    level /= fact;
    double endpoint_term = 0.0;
    if (!b.rates.endpoint_exact_zero)
        endpoint_term = std::pow(tau, b.rates.delta1 - 1.0) / std::pow(n, b.rates.gamma1 - 1.0);
    const double dim_term = b.eps(r);
    const double ng = std::pow(n, b.rates.gamma - 1.0);
    MultistepBound out;
    out.printed = level * b.I_H + endpoint_term * b.I_H + (std::pow(tau, b.rates.delta) + 1.0) / ng * *b.I_H2 +
                  dim_term * b.I_H;
    out.tau_variant = level * b.I_H + endpoint_term * b.I_H + std::pow(tau, b.rates.delta + 1.0) / ng * *b.I_H2 +
                      dim_term * b.I_H;
    return out;
}

}  // namespace chaospde
