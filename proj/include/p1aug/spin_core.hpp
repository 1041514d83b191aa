#pragma once

// Small dense complex matrices, angular-momentum operators and a Jacobi
// eigensolver for Hermitian matrices. Sized for spin systems of a handful
// of levels; nothing here is tuned for large dimensions.

#include "p1aug/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace p1aug {

using Complex = std::complex<double>;

class ComplexMatrix {
public:
    ComplexMatrix() = default;

    ComplexMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols) {
        if (rows == 0 || cols == 0) {
            throw InvalidInput("ComplexMatrix: dimensions must be >= 1");
        }
    }

    static ComplexMatrix identity(std::size_t n) {
        ComplexMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static ComplexMatrix diagonal(std::span<const double> d) {
        ComplexMatrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool is_square() const noexcept { return rows_ == cols_; }

    Complex& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const Complex& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const Complex> data() const noexcept { return data_; }

    std::vector<Complex> column(std::size_t c) const {
        std::vector<Complex> v(rows_);
        for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
        return v;
    }

    ComplexMatrix adjoint() const {
        ComplexMatrix m(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) m(c, r) = std::conj((*this)(r, c));
        return m;
    }

    Complex trace() const {
        Complex t = 0.0;
        for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
        return t;
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& z : data_) m = std::max(m, std::abs(z));
        return m;
    }

    /// Elementwise |M - M^dagger| <= tol.
    bool is_hermitian(double tol = 1e-12) const {
        if (!is_square()) return false;
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = r; c < cols_; ++c)
                if (std::abs((*this)(r, c) - std::conj((*this)(c, r))) > tol) return false;
        return true;
    }

    ComplexMatrix& operator+=(const ComplexMatrix& o) {
        require_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    ComplexMatrix& operator-=(const ComplexMatrix& o) {
        require_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    ComplexMatrix& operator*=(Complex s) {
        for (auto& z : data_) z *= s;
        return *this;
    }

    friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
    friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
    friend ComplexMatrix operator*(ComplexMatrix a, Complex s) { return a *= s; }
    friend ComplexMatrix operator*(Complex s, ComplexMatrix a) { return a *= s; }
    friend ComplexMatrix operator*(double s, ComplexMatrix a) { return a *= Complex(s); }

    friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
        if (a.cols_ != b.rows_) throw InvalidInput("ComplexMatrix: inner dimensions differ");
        ComplexMatrix m(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const Complex aik = a(i, k);
                if (aik == Complex{}) continue;
                for (std::size_t j = 0; j < b.cols_; ++j) m(i, j) += aik * b(k, j);
            }
        return m;
    }

    friend bool operator==(const ComplexMatrix&, const ComplexMatrix&) = default;

private:
    void require_same_shape(const ComplexMatrix& o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_) throw InvalidInput("ComplexMatrix: shape mismatch");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Complex> data_;
};

/// <u|M|v>
inline Complex matrix_element(std::span<const Complex> u, const ComplexMatrix& m,
                              std::span<const Complex> v) {
    Complex acc = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        Complex row = 0.0;
        for (std::size_t c = 0; c < m.cols(); ++c) row += m(r, c) * v[c];
        acc += std::conj(u[r]) * row;
    }
    return acc;
}

inline Complex inner_product(std::span<const Complex> u, std::span<const Complex> v) {
    Complex acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) acc += std::conj(u[i]) * v[i];
    return acc;
}

/// Kronecker product, row-major blocks: (a⊗b)(i*rb + k, j*cb + l) = a(i,j) b(k,l).
inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix m(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const Complex aij = a(i, j);
            for (std::size_t k = 0; k < b.rows(); ++k)
                for (std::size_t l = 0; l < b.cols(); ++l)
                    m(i * b.rows() + k, j * b.cols() + l) = aij * b(k, l);
        }
    return m;
}

inline ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) {
    return a * b - b * a;
}

struct SpinOperatorSet {
    double spin = 0.0;
    ComplexMatrix sx;
    ComplexMatrix sy;
    ComplexMatrix sz;

    std::size_t dim() const noexcept { return sz.rows(); }
};

/// Spin-s matrices in the |s,m> basis, m = s, s-1, ..., -s.
inline SpinOperatorSet spin_operators(double s) {
    const double twice = 2.0 * s;
    if (!std::isfinite(s) || s < 0.0 || std::abs(twice - std::round(twice)) > 1e-12) {
        throw InvalidInput("spin_operators: 2s must be a nonnegative integer, got s = " +
                           std::to_string(s));
    }
    const auto n = static_cast<std::size_t>(std::llround(twice)) + 1;
    s = 0.5 * static_cast<double>(n - 1);

    ComplexMatrix raise(n, n);
    ComplexMatrix sz(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const double m = s - static_cast<double>(k);
        sz(k, k) = m;
        if (k > 0) raise(k - 1, k) = std::sqrt(s * (s + 1.0) - m * (m + 1.0));
    }
    const ComplexMatrix lower = raise.adjoint();

    SpinOperatorSet ops;
    ops.spin = s;
    ops.sx = 0.5 * (raise + lower);
    ops.sy = Complex(0.0, -0.5) * (raise - lower);
    ops.sz = std::move(sz);
    return ops;
}

struct EigenDecomposition {
    std::vector<double> eigenvalues;   // ascending
    ComplexMatrix eigenvectors;        // column k pairs with eigenvalues[k]
};

namespace detail {

inline double off_diagonal_norm(const ComplexMatrix& a) {
    double s = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c)
            if (r != c) s += std::norm(a(r, c));
    return std::sqrt(s);
}

inline double frobenius_norm(const ComplexMatrix& a) {
    double s = 0.0;
    for (const auto& z : a.data()) s += std::norm(z);
    return std::sqrt(s);
}

} // namespace detail

struct JacobiOptions {
    int max_sweeps = 100;
    double relative_tolerance = 1e-14;
    double hermitian_tolerance = 1e-10;
};

/// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// The input is symmetrized as (H + H^dagger)/2 after the Hermiticity check.
/// Eigenvalues come back ascending; each eigenvector has its largest-magnitude
/// component made real and positive (lowest index wins ties), so the output
/// is a deterministic function of the input.
inline EigenDecomposition hermitian_eig(const ComplexMatrix& h, const JacobiOptions& opts = {},
                                        const std::string& name = "matrix") {
    if (!h.is_square()) throw InvalidInput("hermitian_eig: " + name + " is not square");
    const double scale = std::max(1.0, h.max_abs());
    if (!h.is_hermitian(opts.hermitian_tolerance * scale)) {
        throw InvalidInput("hermitian_eig: " + name + " is not Hermitian");
    }

    const std::size_t n = h.rows();
    ComplexMatrix a = 0.5 * (h + h.adjoint());
    for (std::size_t i = 0; i < n; ++i) a(i, i) = a(i, i).real();
    ComplexMatrix v = ComplexMatrix::identity(n);

    const double threshold = opts.relative_tolerance * detail::frobenius_norm(a);
    bool converged = detail::off_diagonal_norm(a) <= threshold;
    for (int sweep = 0; sweep < opts.max_sweeps && !converged; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double mag = std::abs(a(p, q));
                if (mag == 0.0) continue;
                const Complex phase = a(p, q) / mag;
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();

                // Real rotation for [[app, mag], [mag, aqq]], dressed with the phase of a(p,q).
                const double tau = (aqq - app) / (2.0 * mag);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                const Complex jpq = s * phase;            // J(p,q)
                const Complex jqp = -s * std::conj(phase); // J(q,p)

                for (std::size_t k = 0; k < n; ++k) {
                    const Complex akp = a(k, p);
                    const Complex akq = a(k, q);
                    a(k, p) = c * akp + jqp * akq;
                    a(k, q) = jpq * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const Complex apk = a(p, k);
                    const Complex aqk = a(q, k);
                    a(p, k) = c * apk + std::conj(jqp) * aqk;
                    a(q, k) = std::conj(jpq) * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                a(p, p) = app - t * mag;
                a(q, q) = aqq + t * mag;

                for (std::size_t k = 0; k < n; ++k) {
                    const Complex vkp = v(k, p);
                    const Complex vkq = v(k, q);
                    v(k, p) = c * vkp + jqp * vkq;
                    v(k, q) = jpq * vkp + c * vkq;
                }
            }
        }
        converged = detail::off_diagonal_norm(a) <= threshold;
    }
    if (!converged) {
        throw NumericalFailure("hermitian_eig: Jacobi iteration on " + name + " did not converge in " +
                               std::to_string(opts.max_sweeps) + " sweeps");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i).real() < a(j, j).real(); });

    EigenDecomposition out;
    out.eigenvalues.resize(n);
    out.eigenvectors = ComplexMatrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t src = order[k];
        out.eigenvalues[k] = a(src, src).real();

        double norm2 = 0.0;
        double biggest = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            norm2 += std::norm(v(r, src));
            biggest = std::max(biggest, std::abs(v(r, src)));
        }
        std::size_t pivot = 0;
        while (std::abs(v(pivot, src)) < biggest * (1.0 - 1e-10)) ++pivot;
        const Complex fix = std::conj(v(pivot, src)) / (std::abs(v(pivot, src)) * std::sqrt(norm2));
        for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, k) = v(r, src) * fix;
        out.eigenvectors(pivot, k) = std::abs(out.eigenvectors(pivot, k));
    }
    return out;
}

} // namespace p1aug
