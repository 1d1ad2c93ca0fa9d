#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "chaospde/time_grid.hpp"

namespace chaospde {

// Orthonormal cosine basis of L2((0,T)):
//   m_1(t) = 1/sqrt(T),  m_k(t) = sqrt(2/T) cos(pi (k-1) t / T)  for k > 1.
inline double eval_basis(int k, double t, double T) {
    if (k < 1) throw std::domain_error("eval_basis: k must be >= 1");
    if (!(T > 0.0)) throw std::domain_error("eval_basis: horizon must be positive");
    if (t < 0.0 || t > T) throw std::domain_error("eval_basis: t outside [0, T]");
    if (k == 1) return 1.0 / std::sqrt(T);
    return std::sqrt(2.0 / T) * std::cos(M_PI * static_cast<double>(k - 1) * t / T);
}

// Indicator of [0, t], closed at both ends.
inline double chi(double t, double s) { return (s >= 0.0 && s <= t) ? 1.0 : 0.0; }

inline std::vector<double> sample_basis(int k, const TimeGrid& grid) {
    return grid.sample([&](double t) { return eval_basis(k, t, grid.horizon()); });
}

}  // namespace chaospde
