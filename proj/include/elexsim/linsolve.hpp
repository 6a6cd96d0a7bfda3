#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace elex {

/// Row-major dense square or rectangular matrix.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const double> data() const { return data_; }

    std::vector<double> multiply(std::span<const double> x) const;
    double max_abs() const;

    bool operator==(const DenseMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Combined L (unit diagonal, below) and U (on and above) storage with the
/// row permutation applied: P*A = L*U.
struct LuFactors {
    std::size_t n = 0;
    std::vector<double> lu;
    std::vector<std::size_t> perm;  // perm[i] = original row placed at row i
    bool singular = false;
};

/// Relative pivot threshold below which the matrix is declared singular.
inline constexpr double kSingularPivotRatio = 1e-12;

/// Gaussian elimination with partial pivoting. A pivot smaller than
/// pivot_ratio * max|A_ij| marks the factors singular; never throws for a
/// square input.
LuFactors lu_factor(const DenseMatrix& a, double pivot_ratio = kSingularPivotRatio);

/// Solves A x = b with previously computed factors. Throws SingularityError
/// when the factors are singular.
std::vector<double> lu_solve(const LuFactors& f, std::span<const double> b);

double max_abs(std::span<const double> v);

}  // namespace elex
