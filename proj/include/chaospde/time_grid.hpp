#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "chaospde/common.hpp"

namespace chaospde {

// Uniform grid on [0, T] with M subintervals, nodes t_i = i*T/M.
class TimeGrid {
public:
    TimeGrid(double T, std::size_t M) : horizon_(T), subintervals_(M) {
        if (!(T > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be positive");
        if (M < 2) throw std::invalid_argument("TimeGrid: need at least 2 subintervals");
    }

    double horizon() const { return horizon_; }
    std::size_t subintervals() const { return subintervals_; }
    std::size_t nodes() const { return subintervals_ + 1; }
    double step() const { return horizon_ / static_cast<double>(subintervals_); }
    double node(std::size_t i) const { return horizon_ * static_cast<double>(i) / static_cast<double>(subintervals_); }

    bool operator==(const TimeGrid& other) const {
        return horizon_ == other.horizon_ && subintervals_ == other.subintervals_;
    }
    bool operator!=(const TimeGrid& other) const { return !(*this == other); }

    // Nearest node index for t in [0, T].
    std::size_t index_of(double t) const {
        double x = t / step();
        auto i = static_cast<long long>(std::llround(x));
        if (i < 0) i = 0;
        if (i > static_cast<long long>(subintervals_)) i = static_cast<long long>(subintervals_);
        return static_cast<std::size_t>(i);
    }

    template <typename Fn>
    std::vector<double> sample(Fn&& fn) const {
        std::vector<double> out(nodes());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(node(i));
        return out;
    }

private:
    double horizon_;
    std::size_t subintervals_;
};

inline void require_same_grid_size(const TimeGrid& grid, std::size_t values) {
    if (values != grid.nodes())
        throw std::invalid_argument("sampled function does not match the grid");
}

// Composite trapezoid of the node values over the full interval.
inline double trapezoid(const TimeGrid& grid, const std::vector<double>& values) {
    require_same_grid_size(grid, values.size());
    double acc = 0.5 * (values.front() + values.back());
    for (std::size_t i = 1; i + 1 < values.size(); ++i) acc += values[i];
    return acc * grid.step();
}

// Running trapezoid integral; out[i] = integral over [0, t_i].
inline std::vector<double> cumulative_trapezoid(const TimeGrid& grid, const std::vector<double>& values) {
    require_same_grid_size(grid, values.size());
    std::vector<double> out(values.size());
    out[0] = 0.0;
    double h = grid.step();
    for (std::size_t i = 1; i < values.size(); ++i)
        out[i] = out[i - 1] + 0.5 * h * (values[i - 1] + values[i]);
    return out;
}

// Composite Simpson over [0, t_upto] where upto is an even node index.
inline double simpson_prefix(const TimeGrid& grid, const std::vector<double>& values, std::size_t upto) {
    require_same_grid_size(grid, values.size());
    if (upto % 2 != 0 || upto > grid.subintervals())
        throw std::invalid_argument("simpson_prefix: upper node index must be even and in range");
    if (upto == 0) return 0.0;
    double acc = values[0] + values[upto];
    for (std::size_t i = 1; i < upto; i += 2) acc += 4.0 * values[i];
    for (std::size_t i = 2; i < upto; i += 2) acc += 2.0 * values[i];
    return acc * grid.step() / 3.0;
}

// L2((0,T)) pairing of two sampled functions, composite trapezoid.
// Error O(M^-2) for C^2 integrands.
inline double inner_product(const TimeGrid& grid, const std::vector<double>& f, const std::vector<double>& g) {
    require_same_grid_size(grid, f.size());
    require_same_grid_size(grid, g.size());
    double h = grid.step();
    double acc = 0.5 * (f.front() * g.front() + f.back() * g.back());
    for (std::size_t i = 1; i + 1 < f.size(); ++i) acc += f[i] * g[i];
    return acc * h;
}

}  // namespace chaospde
