#include "esrstm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "esrstm/errors.hpp"

namespace esrstm::linalg {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n);
    for (std::size_t i = 0; i < n; ++i)
        m.at(i, i) = 1.0;
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j)
            t.at(j, i) = at(i, j);
    return t;
}

double Matrix::max_abs() const {
    double m = 0.0;
    for (double v : a_)
        m = std::max(m, std::fabs(v));
    return m;
}

double Matrix::frobenius() const {
    double s = 0.0;
    for (double v : a_)
        s += v * v;
    return std::sqrt(s);
}

bool Matrix::is_symmetric(double tol_rel) const {
    if (rows_ != cols_)
        return false;
    const double tol = tol_rel * std::max(max_abs(), 1e-300);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = i + 1; j < cols_; ++j)
            if (std::fabs(at(i, j) - at(j, i)) > tol)
                return false;
    return true;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_)
        throw DomainError("Matrix multiply: shape mismatch");
    Matrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
        for (std::size_t k = 0; k < a.cols_; ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0)
                continue;
            for (std::size_t j = 0; j < b.cols_; ++j)
                c.at(i, j) += aik * b.at(k, j);
        }
    return c;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_)
        throw DomainError("Matrix add: shape mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < c.a_.size(); ++i)
        c.a_[i] += b.a_[i];
    return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_)
        throw DomainError("Matrix subtract: shape mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < c.a_.size(); ++i)
        c.a_[i] -= b.a_[i];
    return c;
}

Matrix operator*(double s, const Matrix& a) {
    Matrix c = a;
    for (double& v : c.a_)
        v *= s;
    return c;
}

void Matrix::add_scaled(double s, const Matrix& m) {
    if (rows_ != m.rows_ || cols_ != m.cols_)
        throw DomainError("Matrix add_scaled: shape mismatch");
    for (std::size_t i = 0; i < a_.size(); ++i)
        a_[i] += s * m.a_[i];
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i1 = 0; i1 < a.rows(); ++i1)
        for (std::size_t j1 = 0; j1 < a.cols(); ++j1) {
            const double av = a.at(i1, j1);
            if (av == 0.0)
                continue;
            for (std::size_t i2 = 0; i2 < b.rows(); ++i2)
                for (std::size_t j2 = 0; j2 < b.cols(); ++j2)
                    c.at(i1 * b.rows() + i2, j1 * b.cols() + j2) = av * b.at(i2, j2);
        }
    return c;
}

namespace {

double offdiagonal_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j)
            s += 2.0 * a.at(i, j) * a.at(i, j);
    return std::sqrt(s);
}

} // namespace

EighResult eigh(const Matrix& m) {
    if (m.rows() != m.cols())
        throw DomainError("eigh: matrix must be square");
    if (!m.is_symmetric())
        throw DomainError("eigh: matrix must be symmetric");

    const std::size_t n = m.rows();
    // Symmetrize exactly so rotations see a consistent upper/lower half.
    Matrix a(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            a.at(i, j) = 0.5 * (m.at(i, j) + m.at(j, i));
    Matrix v = Matrix::identity(n);

    const double scale = std::max(a.frobenius(), 1e-300);
    const int max_sweeps = 60;
    bool done = false;
    for (int sweep = 0; sweep < max_sweeps && !done; ++sweep) {
        const double off = offdiagonal_norm(a);
        if (off <= 1e-14 * scale) {
            done = true;
            break;
        }
        // Threshold: skip rotations that cannot matter this sweep.
        const double thresh = (sweep < 3) ? 0.2 * off / static_cast<double>(n * n) : 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (std::fabs(apq) <= thresh || apq == 0.0)
                    continue;
                const double app = a.at(p, p);
                const double aqq = a.at(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);

                a.at(p, p) = app - t * apq;
                a.at(q, q) = aqq + t * apq;
                a.at(p, q) = 0.0;
                a.at(q, p) = 0.0;
                for (std::size_t r = 0; r < n; ++r) {
                    if (r != p && r != q) {
                        const double arp = a.at(r, p);
                        const double arq = a.at(r, q);
                        a.at(r, p) = arp - s * (arq + tau * arp);
                        a.at(p, r) = a.at(r, p);
                        a.at(r, q) = arq + s * (arp - tau * arq);
                        a.at(q, r) = a.at(r, q);
                    }
                    const double vrp = v.at(r, p);
                    const double vrq = v.at(r, q);
                    v.at(r, p) = vrp - s * (vrq + tau * vrp);
                    v.at(r, q) = vrq + s * (vrp - tau * vrq);
                }
            }
        }
    }
    if (!done && offdiagonal_norm(a) > 1e-14 * scale)
        throw NumericError("eigh: Jacobi sweeps did not converge");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&a](std::size_t i, std::size_t j) { return a.at(i, i) < a.at(j, j); });

    EighResult out;
    out.eigenvalues.resize(n);
    out.eigenvectors = Matrix(n);
    for (std::size_t k = 0; k < n; ++k) {
        out.eigenvalues[k] = a.at(order[k], order[k]);
        for (std::size_t r = 0; r < n; ++r)
            out.eigenvectors.at(r, k) = v.at(r, order[k]);
    }
    return out;
}

bool solve_linear(Matrix a, std::vector<double> b, std::vector<double>& x) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.size() != n)
        throw DomainError("solve_linear: shape mismatch");
    const double tiny = 1e-14 * std::max(a.max_abs(), 1e-300);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a.at(r, col)) > std::fabs(a.at(piv, col)))
                piv = r;
        if (std::fabs(a.at(piv, col)) <= tiny)
            return false;
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j)
                std::swap(a.at(piv, j), a.at(col, j));
            std::swap(b[piv], b[col]);
        }
        const double inv_p = 1.0 / a.at(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a.at(r, col) * inv_p;
            if (f == 0.0)
                continue;
            for (std::size_t j = col; j < n; ++j)
                a.at(r, j) -= f * a.at(col, j);
            b[r] -= f * b[col];
        }
    }
    x.assign(n, 0.0);
    for (std::size_t ri = n; ri-- > 0;) {
        double s = b[ri];
        for (std::size_t j = ri + 1; j < n; ++j)
            s -= a.at(ri, j) * x[j];
        x[ri] = s / a.at(ri, ri);
    }
    return true;
}

bool invert(const Matrix& a, Matrix& inv) {
    const std::size_t n = a.rows();
    inv = Matrix(n);
    std::vector<double> e(n, 0.0), col;
    for (std::size_t j = 0; j < n; ++j) {
        std::fill(e.begin(), e.end(), 0.0);
        e[j] = 1.0;
        if (!solve_linear(a, e, col))
            return false;
        for (std::size_t i = 0; i < n; ++i)
            inv.at(i, j) = col[i];
    }
    return true;
}

} // namespace esrstm::linalg
