#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "chaospde/basis.hpp"
#include "chaospde/time_grid.hpp"

namespace chaospde {

enum class NoiseKind { White, OrnsteinUhlenbeck, Fractional };

// One colored noise on L2((0,T)), described by its representation operator:
//   White:              identity,
//   OrnsteinUhlenbeck:  f(t) + int_0^t (-b e^{-b(t-s)}) f(s) ds,
//   Fractional:         int_0^t C_H (H-1/2) (t/s)^{H-1/2} (t-s)^{H-3/2} f(s) ds,
// with 1/2 < H < 1. The fractional kernel is the classical fBm Volterra
// kernel in derivative form; it reproduces Var X(t) = t^{2H}.
struct NoiseSpec {
    NoiseKind kind = NoiseKind::White;
    double b = 1.0;    // OU relaxation rate
    double H = 0.75;   // Hurst parameter
    double T = 1.0;    // horizon of the underlying L2((0,T))

    static NoiseSpec white(double T) { return validated({NoiseKind::White, 1.0, 0.75, T}); }
    static NoiseSpec ornstein_uhlenbeck(double b, double T) {
        return validated({NoiseKind::OrnsteinUhlenbeck, b, 0.75, T});
    }
    static NoiseSpec fractional(double H, double T) { return validated({NoiseKind::Fractional, 1.0, H, T}); }

    static NoiseSpec validated(NoiseSpec s) {
        if (!(s.T > 0.0)) throw std::invalid_argument("NoiseSpec: horizon must be positive");
        if (s.kind == NoiseKind::OrnsteinUhlenbeck && !(s.b > 0.0))
            throw std::invalid_argument("NoiseSpec: OU rate b must be positive");
        if (s.kind == NoiseKind::Fractional && !(s.H > 0.5 && s.H < 1.0))
            throw std::invalid_argument("NoiseSpec: Hurst parameter must lie in (1/2, 1)");
        return s;
    }

    NoiseSpec with_horizon(double newT) const {
        NoiseSpec s = *this;
        s.T = newT;
        return validated(s);
    }
};

// Decay exponents of the integrated filtered basis functions:
//   sup_t |I_k(t)|^2 <= C T^delta / k^gamma,   |I_k(T)|^2 <= C T^delta1 / k^gamma1.
// For white noise I_k(T) = 0 exactly for k >= 2; endpoint_exact_zero marks
// that case and the endpoint error term is dropped instead of evaluated.
struct RateExponents {
    double delta = 1.0;
    double gamma = 2.0;
    double delta1 = std::numeric_limits<double>::infinity();
    double gamma1 = std::numeric_limits<double>::infinity();
    bool endpoint_exact_zero = false;
};

inline RateExponents rate_exponents(const NoiseSpec& spec) {
    switch (spec.kind) {
        case NoiseKind::White:
            return {1.0, 2.0, std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), true};
        case NoiseKind::OrnsteinUhlenbeck:
            return {1.0, 2.0, 3.0, 4.0, false};
        case NoiseKind::Fractional:
            return {2.0 * spec.H, 3.0 - 2.0 * spec.H, 2.0 * spec.H, 3.0 - 2.0 * spec.H, false};
    }
    throw std::logic_error("rate_exponents: unknown noise kind");
}

// C1(H) = H(2H-1) Gamma(H-1/2) / Gamma(H+1/2); the squared operator norm of
// the fractional representation operator is C1(H) T^{2H-1}.
inline double fractional_c1(double H) {
    return H * (2.0 * H - 1.0) * std::tgamma(H - 0.5) / std::tgamma(H + 0.5);
}

// Kernel normalizer C_H = sqrt(2H Gamma(3/2-H) / (Gamma(H+1/2) Gamma(2-2H))).
inline double fractional_kernel_constant(double H) {
    return std::sqrt(2.0 * H * std::tgamma(1.5 - H) / (std::tgamma(H + 0.5) * std::tgamma(2.0 - 2.0 * H)));
}

// Operator norm bound of the representation operator on L2((0,T)).
inline double operator_norm_bound(const NoiseSpec& spec) {
    switch (spec.kind) {
        case NoiseKind::White:
            return 1.0;
        case NoiseKind::OrnsteinUhlenbeck:
            return 1.0 + std::sqrt(spec.b * spec.T);
        case NoiseKind::Fractional:
            return std::sqrt(fractional_c1(spec.H)) * std::pow(spec.T, spec.H - 0.5);
    }
    throw std::logic_error("operator_norm_bound: unknown noise kind");
}

namespace detail {

// Cell weights of the exponential integrator:
//   int_0^h e^{z (h-s)/h ... } against a linear interpolant:
//   g0(z) = (e^z (z-1) + 1)/z^2 (left node), g1(z) = (e^z - 1 - z)/z^2 (right).
inline void exp_integrator_weights(double z, double& g0, double& g1) {
    if (std::fabs(z) < 1e-4) {
        g0 = 0.5 + z * (1.0 / 3.0 + z * (0.125 + z / 30.0));
        g1 = 0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0));
        return;
    }
    double ez = std::exp(z);
    g0 = (ez * (z - 1.0) + 1.0) / (z * z);
    g1 = (ez - 1.0 - z) / (z * z);
}

inline double beta_fn(double x, double y) { return std::tgamma(x) * std::tgamma(y) / std::tgamma(x + y); }

}  // namespace detail

// Applies the representation operator to a function sampled on the grid.
// OU: the convolution part is advanced cell by cell with the kernel handled
// exactly and f interpolated linearly. Fractional: the weakly singular weight
// (t-s)^{H-3/2} and the s^{1/2-H} factor at s=0 are integrated analytically
// against a piecewise-linear interpolant.
inline std::vector<double> apply_noise_operator(const NoiseSpec& spec, const TimeGrid& grid,
                                                const std::vector<double>& values) {
    require_same_grid_size(grid, values.size());
    if (grid.horizon() != spec.T)
        throw std::invalid_argument("apply_noise_operator: grid horizon does not match the noise horizon");
    const std::size_t M = grid.subintervals();
    const double h = grid.step();

    switch (spec.kind) {
        case NoiseKind::White:
            return values;

        case NoiseKind::OrnsteinUhlenbeck: {
            std::vector<double> out(values.size());
            double g0, g1;
            detail::exp_integrator_weights(-spec.b * h, g0, g1);
            double decay = std::exp(-spec.b * h);
            double J = 0.0;  // int_0^{t_i} e^{-b(t_i - s)} f(s) ds
            out[0] = values[0];
            for (std::size_t i = 1; i <= M; ++i) {
                J = decay * J + h * (g0 * values[i - 1] + g1 * values[i]);
                out[i] = values[i] - spec.b * J;
            }
            return out;
        }

        case NoiseKind::Fractional: {
            const double H = spec.H;
            const double C = fractional_kernel_constant(H) * (H - 0.5);
            const double beta1 = detail::beta_fn(1.5 - H, H - 0.5);
            const double beta2 = detail::beta_fn(2.5 - H, H - 0.5);

            // One node value on a uniform partition of [0, t] into R cells
            // with spacing hh. fv/phiv hold f and phi(s) = s^{1/2-H} f(s) at
            // the partition nodes; pa/pb are lag tables (m*hh)^{H-+1/2}.
            // First cell: s^{1/2-H} moments exact (full Beta moments when
            // R == 1); remaining cells: (t-s)^{H-3/2} integrated exactly
            // against piecewise-linear phi.
            auto node_value = [&](double t, std::size_t R, double hh, const double* fv, const double* phiv,
                                  const double* pa, const double* pb) {
                double val;
                if (R == 1) {
                    val = fv[0] * (beta1 - beta2) + fv[1] * beta2;
                } else {
                    double ga = std::pow(t, H - 1.5) * fv[0];
                    double gb = std::pow(t - hh, H - 1.5) * fv[1];
                    val = ga * std::pow(hh, 1.5 - H) / (1.5 - H) + (gb - ga) / hh * std::pow(hh, 2.5 - H) / (2.5 - H);
                    for (std::size_t j = 1; j < R; ++j) {
                        const std::size_t lag = R - j;
                        double I0 = (pa[lag] - pa[lag - 1]) / (H - 0.5);
                        double I1 = (pb[lag] - pb[lag - 1]) / (H + 0.5);
                        val += phiv[j] * I0 +
                               (phiv[j + 1] - phiv[j]) / hh * (static_cast<double>(lag) * hh * I0 - I1);
                    }
                }
                return C * std::pow(t, H - 0.5) * val;
            };

            std::vector<double> phi(values.size(), 0.0);
            for (std::size_t j = 1; j <= M; ++j) phi[j] = std::pow(grid.node(j), 0.5 - H) * values[j];
            std::vector<double> pa(M + 1, 0.0), pb(M + 1, 0.0);
            for (std::size_t m = 1; m <= M; ++m) {
                double lagv = static_cast<double>(m) * h;
                pa[m] = std::pow(lagv, H - 0.5);
                pb[m] = std::pow(lagv, H + 0.5);
            }

            std::vector<double> out(values.size(), 0.0);
            // Near t = 0 the s^{1/2-H} corner spans a sizable fraction of the
            // cells; those nodes are re-evaluated on a refined local
            // partition with f interpolated linearly between input samples.
            const std::size_t head = std::min<std::size_t>(512, M);
            auto f_interp = [&](double s) {
                double x = s / h;
                auto j = static_cast<std::size_t>(x);
                if (j >= M) return values[M];
                double w = x - static_cast<double>(j);
                return (1.0 - w) * values[j] + w * values[j + 1];
            };
            std::vector<double> lfv, lphi, lpa, lpb;
            for (std::size_t i = 1; i <= head; ++i) {
                const std::size_t R = std::max<std::size_t>(256, 2 * i);
                double t = grid.node(i);
                double hh = t / static_cast<double>(R);
                lfv.assign(R + 1, 0.0);
                lphi.assign(R + 1, 0.0);
                lpa.assign(R + 1, 0.0);
                lpb.assign(R + 1, 0.0);
                lfv[0] = values[0];
                for (std::size_t j = 1; j <= R; ++j) {
                    double s = static_cast<double>(j) * hh;
                    lfv[j] = f_interp(s);
                    lphi[j] = std::pow(s, 0.5 - H) * lfv[j];
                    lpa[j] = std::pow(s, H - 0.5);
                    lpb[j] = std::pow(s, H + 0.5);
                }
                out[i] = node_value(t, R, hh, lfv.data(), lphi.data(), lpa.data(), lpb.data());
            }
            for (std::size_t i = head + 1; i <= M; ++i)
                out[i] = node_value(grid.node(i), i, h, values.data(), phi.data(), pa.data(), pb.data());
            return out;
        }
    }
    throw std::logic_error("apply_noise_operator: unknown noise kind");
}

// (K m_k)(t) in closed form; white and OU only.
inline double filtered_basis(const NoiseSpec& spec, int k, double t) {
    if (k < 1) throw std::domain_error("filtered_basis: k must be >= 1");
    const double T = spec.T;
    switch (spec.kind) {
        case NoiseKind::White:
            return eval_basis(k, t, T);
        case NoiseKind::OrnsteinUhlenbeck: {
            double b = spec.b;
            if (k == 1) return std::exp(-b * t) / std::sqrt(T);
            double w = M_PI * static_cast<double>(k - 1) / T;
            return std::sqrt(2.0 / T) * (w * w * std::cos(w * t) - b * w * std::sin(w * t) + b * b * std::exp(-b * t)) /
                   (b * b + w * w);
        }
        case NoiseKind::Fractional:
            throw std::invalid_argument("filtered_basis: no closed form for fractional noise; use NoiseDiscretization");
    }
    throw std::logic_error("filtered_basis: unknown noise kind");
}

// I_k(t) = int_0^t (K m_k)(s) ds in closed form; white and OU only.
inline double filtered_basis_integral_closed(const NoiseSpec& spec, int k, double t) {
    if (k < 1) throw std::domain_error("filtered_basis_integral: k must be >= 1");
    const double T = spec.T;
    switch (spec.kind) {
        case NoiseKind::White: {
            if (k == 1) return t / std::sqrt(T);
            double w = M_PI * static_cast<double>(k - 1) / T;
            return std::sqrt(2.0 * T) / (M_PI * static_cast<double>(k - 1)) * std::sin(w * t);
        }
        case NoiseKind::OrnsteinUhlenbeck: {
            double b = spec.b;
            if (k == 1) return (1.0 - std::exp(-b * t)) / (b * std::sqrt(T));
            double km1pi = M_PI * static_cast<double>(k - 1);
            double w = km1pi / T;
            return std::sqrt(2.0 * T * T * T) / (b * b * T * T + km1pi * km1pi) *
                   (b * std::cos(w * t) - b * std::exp(-b * t) + w * std::sin(w * t));
        }
        case NoiseKind::Fractional:
            throw std::invalid_argument(
                "filtered_basis_integral_closed: no closed form for fractional noise; use NoiseDiscretization");
    }
    throw std::logic_error("filtered_basis_integral_closed: unknown noise kind");
}

// Grid view of one noise: rows (K m_k) and their running integrals I_k for
// k = 1..max_order. White/OU rows come from closed forms; fractional rows
// from the product-integration quadrature. Immutable after construction.
class NoiseDiscretization {
public:
    NoiseDiscretization(NoiseSpec spec, TimeGrid grid, int max_order)
        : spec_(NoiseSpec::validated(spec)), grid_(grid), max_order_(max_order) {
        if (max_order < 1) throw std::invalid_argument("NoiseDiscretization: max_order must be >= 1");
        if (grid.horizon() != spec.T)
            throw std::invalid_argument("NoiseDiscretization: grid horizon does not match the noise horizon");
        filtered_.resize(static_cast<std::size_t>(max_order));
        integral_.resize(static_cast<std::size_t>(max_order));
        for (int k = 1; k <= max_order; ++k) {
            std::vector<double> row;
            if (spec_.kind == NoiseKind::Fractional) {
                row = apply_noise_operator(spec_, grid_, sample_basis(k, grid_));
            } else {
                row = grid_.sample([&](double t) { return filtered_basis(spec_, k, t); });
            }
            integral_[static_cast<std::size_t>(k - 1)] = cumulative_trapezoid(grid_, row);
            filtered_[static_cast<std::size_t>(k - 1)] = std::move(row);
        }
    }

    const NoiseSpec& spec() const { return spec_; }
    const TimeGrid& grid() const { return grid_; }
    int max_order() const { return max_order_; }

    const std::vector<double>& filtered_row(int k) const {
        check_k(k);
        return filtered_[static_cast<std::size_t>(k - 1)];
    }
    const std::vector<double>& integral_row(int k) const {
        check_k(k);
        return integral_[static_cast<std::size_t>(k - 1)];
    }

    // I_k at a node, from the closed form where one exists.
    double integral_at_node(int k, std::size_t node) const {
        if (spec_.kind == NoiseKind::Fractional) return integral_row(k)[node];
        return filtered_basis_integral_closed(spec_, k, grid_.node(node));
    }

private:
    void check_k(int k) const {
        if (k < 1 || k > max_order_) throw std::domain_error("NoiseDiscretization: basis index out of range");
    }
    NoiseSpec spec_;
    TimeGrid grid_;
    int max_order_;
    std::vector<std::vector<double>> filtered_;
    std::vector<std::vector<double>> integral_;
};

// I_k(t); fractional values come from a quadrature at resolution quad_M.
inline double filtered_basis_integral(const NoiseSpec& spec, int k, double t, std::size_t quad_M = 4096) {
    if (spec.kind != NoiseKind::Fractional) return filtered_basis_integral_closed(spec, k, t);
    TimeGrid grid(spec.T, quad_M);
    NoiseDiscretization disc(spec, grid, k);
    return disc.integral_row(k)[grid.index_of(t)];
}

// Partial covariance sum_{k<=n} I_k(t) I_k(s); with t == s this is the
// partial variance V_n(t), nondecreasing in n with limit Var X(t).
inline double covariance_partial_sum(const NoiseSpec& spec, int n, double t, double s, std::size_t quad_M = 4096) {
    if (n < 1) throw std::invalid_argument("covariance_partial_sum: n must be >= 1");
    double acc = 0.0;
    if (spec.kind == NoiseKind::Fractional) {
        TimeGrid grid(spec.T, quad_M);
        NoiseDiscretization disc(spec, grid, n);
        std::size_t it = grid.index_of(t), is = grid.index_of(s);
        for (int k = 1; k <= n; ++k) acc += disc.integral_row(k)[it] * disc.integral_row(k)[is];
        return acc;
    }
    for (int k = 1; k <= n; ++k)
        acc += filtered_basis_integral_closed(spec, k, t) * filtered_basis_integral_closed(spec, k, s);
    return acc;
}

inline double variance_partial_sum(const NoiseSpec& spec, int n, double t, std::size_t quad_M = 4096) {
    return covariance_partial_sum(spec, n, t, t, quad_M);
}

}  // namespace chaospde
