#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "chaospde/multi_index.hpp"
#include "chaospde/rng.hpp"

namespace chaospde {

// Probabilists' Hermite polynomial H_n (weight e^{-t^2/2}):
// H_0 = 1, H_1 = t, H_{n+1} = t H_n - n H_{n-1}.
// Physicists' convention differs by scaling; everything in this library uses
// the probabilists' one.
inline double hermite(int n, double t) {
    if (n < 0) throw std::domain_error("hermite: degree must be nonnegative");
    if (n > 30) throw std::domain_error("hermite: degree above numerical-stability cap (30)");
    if (n == 0) return 1.0;
    double prev = 1.0, cur = t;
    for (int m = 1; m < n; ++m) {
        double next = t * cur - static_cast<double>(m) * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

// One realization of the driving Gaussians xi_{k,l}, k <= max_order,
// l <= max_dimension. Values are keyed purely by (seed, k, l, sample_id),
// so regeneration in any order reproduces them bit-for-bit.
struct GaussianSample {
    int max_order = 0;
    int max_dimension = 0;
    std::uint64_t seed = 0;
    std::uint64_t sample_id = 0;
    std::vector<double> values;  // row-major over (k-1, l-1)

    double value(int k, int l) const {
        if (k < 1 || k > max_order || l < 1 || l > max_dimension)
            throw std::domain_error("GaussianSample: (k,l) outside the sampled block");
        return values[static_cast<std::size_t>(k - 1) * static_cast<std::size_t>(max_dimension) +
                      static_cast<std::size_t>(l - 1)];
    }

    bool covers(const MultiIndex& alpha) const {
        return alpha.order() <= max_order && alpha.dimension() <= max_dimension;
    }
};

inline GaussianSample sample_gaussians(int n, int r, std::uint64_t seed, std::uint64_t sample_id = 0,
                                       std::uint64_t stream = 0) {
    if (n < 1 || r < 1) throw std::invalid_argument("sample_gaussians: need n >= 1, r >= 1");
    GaussianSample s;
    s.max_order = n;
    s.max_dimension = r;
    s.seed = seed;
    s.sample_id = sample_id;
    s.values.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(r));
    for (int k = 1; k <= n; ++k)
        for (int l = 1; l <= r; ++l)
            s.values[static_cast<std::size_t>(k - 1) * static_cast<std::size_t>(r) + static_cast<std::size_t>(l - 1)] =
                rng::counter_normal(seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(l), sample_id,
                                    stream);
    return s;
}

// Cameron-Martin basis element evaluated at a sample:
//   xi_alpha = prod_{k,l} H_{alpha_{k,l}}(xi_{k,l}) / sqrt(alpha_{k,l}!).
inline double cameron_martin_eval(const MultiIndex& alpha, const GaussianSample& sample) {
    if (!sample.covers(alpha))
        throw std::domain_error("cameron_martin_eval: sample does not cover the multi-index support");
    double prod = 1.0;
    for (const auto& e : alpha.entries()) {
        double fact = 1.0;
        for (int c = 2; c <= e.count; ++c) fact *= static_cast<double>(c);
        prod *= hermite(e.count, sample.value(e.k, e.l)) / std::sqrt(fact);
    }
    return prod;
}

// A single Hermite factor H_degree(xi_{k,l}).
struct HermiteFactor {
    int k = 1;
    int l = 1;
    int degree = 0;
    bool operator==(const HermiteFactor&) const = default;
};

// Wick product of two Hermite factors: degrees add on the same variable,
// distinct variables multiply as an ordinary product.
inline std::vector<HermiteFactor> wick_product(const HermiteFactor& a, const HermiteFactor& b) {
    if (a.degree == 0) return {b};
    if (b.degree == 0) return {a};
    if (a.k == b.k && a.l == b.l) return {HermiteFactor{a.k, a.l, a.degree + b.degree}};
    return {a, b};
}

// Wick product at the basis level: xi_alpha <> xi_beta = c * xi_{alpha+beta}
// with c = sqrt((alpha+beta)! / (alpha! beta!)).
struct WickTerm {
    MultiIndex index;
    double normalization = 1.0;
};

inline WickTerm wick_product(const MultiIndex& alpha, const MultiIndex& beta) {
    WickTerm out;
    out.index = alpha.plus(beta);
    double num = static_cast<double>(out.index.factorial());
    double den = static_cast<double>(alpha.factorial()) * static_cast<double>(beta.factorial());
    out.normalization = std::sqrt(num / den);
    return out;
}

}  // namespace chaospde
