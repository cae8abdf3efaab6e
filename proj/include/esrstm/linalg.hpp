#pragma once

#include <cstddef>
#include <vector>

namespace esrstm::linalg {

/// Small dense real matrix, row-major. Sized for spin spaces (dim <= a few
/// tens), so everything here is plain O(n^2)/O(n^3) with no blocking.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), a_(rows * cols, 0.0) {}
    explicit Matrix(std::size_t n) : Matrix(n, n) {}

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& at(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    double at(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

    const std::vector<double>& data() const { return a_; }

    Matrix transposed() const;
    double max_abs() const;
    double frobenius() const;

    /// True when |M[i][j] - M[j][i]| <= tol_rel * max|M| for all i, j.
    bool is_symmetric(double tol_rel = 1e-12) const;

    friend Matrix operator*(const Matrix& a, const Matrix& b);
    friend Matrix operator+(const Matrix& a, const Matrix& b);
    friend Matrix operator-(const Matrix& a, const Matrix& b);
    friend Matrix operator*(double s, const Matrix& a);

    /// In-place scaled accumulate, this += s * m.
    void add_scaled(double s, const Matrix& m);

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> a_;
};

/// Kronecker product, (a x b)[i1*rb + i2][j1*cb + j2] = a[i1][j1] * b[i2][j2].
Matrix kron(const Matrix& a, const Matrix& b);

struct EighResult {
    std::vector<double> eigenvalues; // ascending
    Matrix eigenvectors;             // column k pairs with eigenvalues[k]
};

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi with threshold
/// sweeps. Deterministic, no pivot randomness. Throws DomainError for an
/// asymmetric input and NumericError if the off-diagonal mass has not
/// vanished after the sweep bound.
EighResult eigh(const Matrix& m);

/// Solve A x = b by Gaussian elimination with partial pivoting.
/// Returns false when a pivot falls below the singularity threshold.
bool solve_linear(Matrix a, std::vector<double> b, std::vector<double>& x);

/// Inverse via the same elimination; false when singular.
bool invert(const Matrix& a, Matrix& inv);

} // namespace esrstm::linalg
