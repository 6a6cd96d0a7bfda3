#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "elexsim/error.hpp"
#include "elexsim/linsolve.hpp"

using namespace elex;

namespace {

DenseMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    DenseMatrix m(rows.size(), rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows.size(); ++c) m(r, c) = rows[r][c];
    return m;
}

double residual(const DenseMatrix& a, const std::vector<double>& x, const std::vector<double>& b) {
    auto ax = a.multiply(x);
    double r = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) r = std::max(r, std::abs(ax[i] - b[i]));
    return r;
}

// Reconstructs P*A - L*U elementwise and returns the largest deviation.
double factor_error(const DenseMatrix& a, const LuFactors& f) {
    const std::size_t n = f.n;
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k <= std::min(i, j); ++k) {
                double l = (k == i) ? 1.0 : f.lu[i * n + k];
                s += l * f.lu[k * n + j];
            }
            worst = std::max(worst, std::abs(a(f.perm[i], j) - s));
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("identity factors without pivoting") {
    DenseMatrix id = from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    auto f = lu_factor(id);
    CHECK_FALSE(f.singular);
    CHECK(f.perm == std::vector<std::size_t>{0, 1, 2});
    for (std::size_t i = 0; i < 9; ++i) CHECK(f.lu[i] == (i % 4 == 0 ? 1.0 : 0.0));
    std::vector<double> b{3, 4, 5};
    CHECK(lu_solve(f, b) == b);
}

TEST_CASE("permutation matrix is pivoted and solvable") {
    DenseMatrix p = from_rows({{0, 1}, {1, 0}});
    auto f = lu_factor(p);
    CHECK_FALSE(f.singular);
    CHECK(f.perm == std::vector<std::size_t>{1, 0});
    auto x = lu_solve(f, std::vector<double>{7, 9});
    CHECK(x[0] == 9.0);
    CHECK(x[1] == 7.0);
}

TEST_CASE("rank-one matrix is singular and solve throws") {
    auto f = lu_factor(from_rows({{1, 2}, {2, 4}}));
    CHECK(f.singular);
    CHECK_THROWS_AS(lu_solve(f, std::vector<double>{1, 1}), SingularityError);
}

TEST_CASE("zero matrix is singular") {
    CHECK(lu_factor(DenseMatrix(3, 3)).singular);
}

TEST_CASE("diagonal system") {
    auto x = lu_solve(lu_factor(from_rows({{2, 0}, {0, 4}})), std::vector<double>{2, 8});
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(x[1] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("singularity threshold is relative to the largest entry") {
    // Scaled far below 1 the matrix is still well conditioned.
    DenseMatrix small = from_rows({{1e-20, 0}, {0, 2e-20}});
    CHECK_FALSE(lu_factor(small).singular);
    // Second pivot 1e-14 versus max entry 1: below 1e-12.
    CHECK(lu_factor(from_rows({{1, 0}, {0, 1e-14}})).singular);
    CHECK_FALSE(lu_factor(from_rows({{1, 0}, {0, 1e-10}})).singular);
}

TEST_CASE("non-square input and bad rhs length are rejected") {
    CHECK_THROWS_AS(lu_factor(DenseMatrix(2, 3)), ParameterError);
    auto f = lu_factor(from_rows({{1, 0}, {0, 1}}));
    CHECK_THROWS_AS(lu_solve(f, std::vector<double>{1, 2, 3}), ParameterError);
}

TEST_CASE("random 8x8 recovers known solution") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    DenseMatrix a(8, 8);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) a(i, j) = u(rng) + (i == j ? 4.0 : 0.0);
    std::vector<double> xs(8);
    for (auto& v : xs) v = u(rng) * 10.0;
    auto b = a.multiply(xs);
    auto x = lu_solve(lu_factor(a), b);
    for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(x[i] - xs[i]) <= 1e-9 * std::max(1.0, std::abs(xs[i])));
}

TEST_CASE("500 random well-conditioned matrices") {
    std::mt19937_64 rng(500);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> dim(1, 20);
    std::uniform_real_distribution<double> scale_exp(-3.0, 3.0);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = static_cast<std::size_t>(dim(rng));
        const double scale = std::pow(10.0, scale_exp(rng));
        DenseMatrix a(n, n);
        // Shuffled rows of a diagonally dominant matrix: forces pivoting
        // while keeping the condition number modest.
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                a(order[i], j) = scale * (u(rng) + (i == j ? static_cast<double>(n) + 1.0 : 0.0));
        std::vector<double> b(n);
        for (auto& v : b) v = u(rng) * 100.0;

        auto f = lu_factor(a);
        REQUIRE_FALSE(f.singular);
        CHECK(factor_error(a, f) <= 1e-12 * a.max_abs() * static_cast<double>(n));
        auto x = lu_solve(f, b);
        CHECK(residual(a, x, b) <= 1e-9 * std::max(1.0, max_abs(b)));
        // Factor once, solve many: bit-identical repeats.
        CHECK(lu_solve(f, b) == x);
    }
}

TEST_CASE("max_abs helpers") {
    CHECK(max_abs(std::vector<double>{}) == 0.0);
    CHECK(max_abs(std::vector<double>{-3, 2}) == 3.0);
    CHECK(from_rows({{1, -5}, {2, 0}}).max_abs() == 5.0);
}
