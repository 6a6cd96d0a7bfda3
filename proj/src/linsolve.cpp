#include "elexsim/linsolve.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "elexsim/error.hpp"

namespace elex {

std::vector<double> DenseMatrix::multiply(std::span<const double> x) const {
    std::vector<double> y(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols_; ++c) s += (*this)(r, c) * x[c];
        y[r] = s;
    }
    return y;
}

double DenseMatrix::max_abs() const { return elex::max_abs(data_); }

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

LuFactors lu_factor(const DenseMatrix& a, double pivot_ratio) {
    if (a.rows() != a.cols()) throw ParameterError("lu_factor: matrix is not square");
    LuFactors f;
    const std::size_t n = a.rows();
    f.n = n;
    f.lu.assign(a.data().begin(), a.data().end());
    f.perm.resize(n);
    std::iota(f.perm.begin(), f.perm.end(), std::size_t{0});
    const double threshold = pivot_ratio * a.max_abs();
    if (n > 0 && a.max_abs() == 0.0) {
        f.singular = true;
        return f;
    }
    auto at = [&](std::size_t r, std::size_t c) -> double& { return f.lu[r * n + c]; };
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        double best = std::abs(at(k, k));
        for (std::size_t r = k + 1; r < n; ++r) {
            if (std::abs(at(r, k)) > best) {
                best = std::abs(at(r, k));
                p = r;
            }
        }
        if (best <= threshold) {
            f.singular = true;
            return f;
        }
        if (p != k) {
            for (std::size_t c = 0; c < n; ++c) std::swap(at(k, c), at(p, c));
            std::swap(f.perm[k], f.perm[p]);
        }
        const double pivot = at(k, k);
        for (std::size_t r = k + 1; r < n; ++r) {
            const double m = at(r, k) / pivot;
            at(r, k) = m;
            if (m == 0.0) continue;
            for (std::size_t c = k + 1; c < n; ++c) at(r, c) -= m * at(k, c);
        }
    }
    return f;
}

std::vector<double> lu_solve(const LuFactors& f, std::span<const double> b) {
    if (f.singular) {
        throw SingularityError("lu_solve: matrix is singular; change switch configuration or enable relaxation");
    }
    if (b.size() != f.n) throw ParameterError("lu_solve: right-hand side has wrong length");
    const std::size_t n = f.n;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[f.perm[i]];
    for (std::size_t i = 0; i < n; ++i) {
        double s = x[i];
        for (std::size_t j = 0; j < i; ++j) s -= f.lu[i * n + j] * x[j];
        x[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = x[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= f.lu[i * n + j] * x[j];
        x[i] = s / f.lu[i * n + i];
    }
    return x;
}

}  // namespace elex
