#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "chaospde/basis.hpp"
#include "chaospde/time_grid.hpp"

using namespace chaospde;

TEST_CASE("cosine basis closed-form values", "[basis]") {
    CHECK(eval_basis(1, 0.3, 1.0) == Catch::Approx(1.0));
    CHECK(eval_basis(2, 0.0, 1.0) == Catch::Approx(std::sqrt(2.0)));
    CHECK(eval_basis(2, 1.0, 1.0) == Catch::Approx(-std::sqrt(2.0)));
    CHECK(eval_basis(1, 0.5, 4.0) == Catch::Approx(0.5));

    CHECK_THROWS_AS(eval_basis(0, 0.5, 1.0), std::domain_error);
    CHECK_THROWS_AS(eval_basis(2, -0.1, 1.0), std::domain_error);
    CHECK_THROWS_AS(eval_basis(2, 1.1, 1.0), std::domain_error);
}

TEST_CASE("interval indicator", "[basis]") {
    CHECK(chi(1.0, 0.5) == 1.0);
    CHECK(chi(1.0, 1.5) == 0.0);
    CHECK(chi(1.0, 1.0) == 1.0);  // closed right endpoint
    CHECK(chi(1.0, 0.0) == 1.0);
    CHECK(chi(1.0, -0.1) == 0.0);
}

TEST_CASE("inner product quadrature", "[basis]") {
    TimeGrid grid(1.0, 1024);
    auto m1 = sample_basis(1, grid);
    auto m2 = sample_basis(2, grid);
    auto m3 = sample_basis(3, grid);
    CHECK(inner_product(grid, m1, m1) == Catch::Approx(1.0).margin(1e-8));
    CHECK(inner_product(grid, m2, m3) == Catch::Approx(0.0).margin(1e-8));

    TimeGrid grid2(2.0, 1024);
    auto ones = grid2.sample([](double) { return 1.0; });
    CHECK(inner_product(grid2, ones, ones) == Catch::Approx(2.0).margin(1e-8));

    TimeGrid other(1.0, 512);
    CHECK_THROWS_AS(inner_product(other, m1, m1), std::invalid_argument);
}

TEST_CASE("gram matrix is the identity", "[basis]") {
    TimeGrid grid(1.0, 4096);
    std::vector<std::vector<double>> rows;
    for (int k = 1; k <= 64; ++k) rows.push_back(sample_basis(k, grid));
    double worst = 0.0;
    for (int j = 1; j <= 64; ++j)
        for (int k = j; k <= 64; ++k) {
            double v = inner_product(grid, rows[j - 1], rows[k - 1]);
            worst = std::max(worst, std::fabs(v - (j == k ? 1.0 : 0.0)));
        }
    CHECK(worst < 1e-7);
}

TEST_CASE("trapezoid refinement is second order", "[basis]") {
    auto value = [](std::size_t M) {
        TimeGrid grid(1.0, M);
        auto f = grid.sample([](double t) { return std::exp(t) * std::sin(2.0 * t + 0.3); });
        auto g = grid.sample([](double t) { return std::cos(t); });
        return inner_product(grid, f, g);
    };
    double d1 = value(256) - value(512);
    double d2 = value(512) - value(1024);
    CHECK(d1 / d2 == Catch::Approx(4.0).margin(0.5));
}

TEST_CASE("cumulative trapezoid and simpson prefix", "[basis]") {
    TimeGrid grid(1.0, 512);
    auto f = grid.sample([](double t) { return 3.0 * t * t; });
    auto cum = cumulative_trapezoid(grid, f);
    CHECK(cum.back() == Catch::Approx(1.0).margin(1e-5));
    CHECK(simpson_prefix(grid, f, 512) == Catch::Approx(1.0).margin(1e-12));
    CHECK(simpson_prefix(grid, f, 256) == Catch::Approx(0.125).margin(1e-12));
    CHECK_THROWS_AS(simpson_prefix(grid, f, 255), std::invalid_argument);
}
