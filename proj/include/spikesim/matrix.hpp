// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "spikesim/errors.hpp"

namespace spikesim {

template <class S> struct scalar_traits {
    static constexpr bool is_complex = false;
    static double abs2(S x) { return x * x; }
    static S conj(S x) { return x; }
    static double real(S x) { return x; }
};
template <class T> struct scalar_traits<std::complex<T>> {
    static constexpr bool is_complex = true;
    static double abs2(std::complex<T> x) { return std::norm(x); }
    static std::complex<T> conj(std::complex<T> x) { return std::conj(x); }
    static double real(std::complex<T> x) { return x.real(); }
};

/// Minimal dense column-major matrix. Only what the library needs; this is
/// not a general linear algebra type.
template <class S> class Matrix {
  public:
    Matrix() = default;
    Matrix(int rows, int cols) : rows_(rows), cols_(cols), a_(std::size_t(rows) * cols, S{}) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    S& operator()(int i, int j) { return a_[std::size_t(j) * rows_ + i]; }
    const S& operator()(int i, int j) const { return a_[std::size_t(j) * rows_ + i]; }
    S* data() { return a_.data(); }
    const S* data() const { return a_.data(); }
    const S* col(int j) const { return a_.data() + std::size_t(j) * rows_; }
    S* col(int j) { return a_.data() + std::size_t(j) * rows_; }

    double max_abs() const {
        double m = 0;
        for (const S& x : a_) m = std::max(m, std::sqrt(scalar_traits<S>::abs2(x)));
        return m;
    }

  private:
    int rows_ = 0, cols_ = 0;
    std::vector<S> a_;
};

/// Dense self-adjoint matrix. The upper triangle is authoritative: the
/// lower triangle is mirrored (conjugate) whenever entries are set through
/// set_upper or finalize_from_upper, so the symmetry invariant holds exactly
/// by construction.
template <class S> class SymmetricMatrix {
  public:
    SymmetricMatrix() = default;
    explicit SymmetricMatrix(int n) : n_(n), a_(n, n) {
        if (n < 1) throw DimensionMismatch("SymmetricMatrix: n must be >= 1");
    }

    int n() const { return n_; }
    const S& operator()(int i, int j) const { return a_(i, j); }
    const Matrix<S>& dense() const { return a_; }
    Matrix<S>& dense_mutable() { return a_; }

    /// Sets entry (i,j) with i <= j and its mirror.
    void set_upper(int i, int j, S v) {
        a_(i, j) = v;
        a_(j, i) = scalar_traits<S>::conj(v);
    }

    /// Re-mirrors the lower triangle from the upper one and makes the
    /// diagonal exactly real in the complex case.
    void finalize_from_upper() {
        for (int j = 0; j < n_; ++j) {
            if constexpr (scalar_traits<S>::is_complex) a_(j, j) = S(scalar_traits<S>::real(a_(j, j)));
            for (int i = 0; i < j; ++i) a_(j, i) = scalar_traits<S>::conj(a_(i, j));
        }
    }

    static SymmetricMatrix diagonal(const std::vector<double>& d) {
        SymmetricMatrix X(int(d.size()));
        for (int i = 0; i < X.n(); ++i) X.set_upper(i, i, S(d[i]));
        return X;
    }

    double max_abs() const { return a_.max_abs(); }

  private:
    int n_ = 0;
    Matrix<S> a_;
};

using RealSymmetric = SymmetricMatrix<double>;
using ComplexHermitian = SymmetricMatrix<std::complex<double>>;

/// y = A x (dense, any shape agreement).
template <class S>
void matvec(const Matrix<S>& A, const S* x, S* y) {
    const int m = A.rows(), n = A.cols();
    for (int i = 0; i < m; ++i) y[i] = S{};
    for (int j = 0; j < n; ++j) {
        const S* cj = A.col(j);
        const S xj = x[j];
        for (int i = 0; i < m; ++i) y[i] += cj[i] * xj;
    }
}

/// y = A^H x.
template <class S>
void matvec_adjoint(const Matrix<S>& A, const S* x, S* y) {
    const int m = A.rows(), n = A.cols();
    for (int j = 0; j < n; ++j) {
        S acc{};
        const S* cj = A.col(j);
        for (int i = 0; i < m; ++i) acc += scalar_traits<S>::conj(cj[i]) * x[i];
        y[j] = acc;
    }
}

template <class S>
S inner(const std::vector<S>& x, const std::vector<S>& y) {
    S acc{};
    for (std::size_t i = 0; i < x.size(); ++i) acc += scalar_traits<S>::conj(x[i]) * y[i];
    return acc;
}

template <class S>
double norm2_sq(const std::vector<S>& x) {
    double acc = 0;
    for (const S& v : x) acc += scalar_traits<S>::abs2(v);
    return acc;
}

} // namespace spikesim
