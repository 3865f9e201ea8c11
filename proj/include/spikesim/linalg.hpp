// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "spikesim/errors.hpp"
#include "spikesim/matrix.hpp"

namespace spikesim {

/// Sorted eigenvalues lambda_1 <= ... <= lambda_n.
struct SpectrumVector {
    std::vector<double> values;

    int n() const { return int(values.size()); }
    double min() const { return values.front(); }
    double max() const { return values.back(); }
    bool sorted() const {
        for (std::size_t i = 1; i < values.size(); ++i)
            if (values[i - 1] > values[i]) return false;
        return true;
    }
};

/// Eigenvalues plus the unitary eigenbasis: column k of `vectors` is the
/// unit eigenvector of values[k].
template <class S> struct EigenDecomposition {
    std::vector<double> values;
    Matrix<S> vectors;
};

namespace detail {

inline lapack_int call_syevd(char jobz, int n, double* a, double* w) {
    return LAPACKE_dsyevd(LAPACK_COL_MAJOR, jobz, 'U', n, a, n, w);
}
inline lapack_int call_syevd(char jobz, int n, std::complex<double>* a, double* w) {
    return LAPACKE_zheevd(LAPACK_COL_MAJOR, jobz, 'U', n, a, n, w);
}
inline lapack_int call_syevr_index(char jobz, int n, double* a, int il, int iu, int* m,
                                   double* w, double* z, int ldz, int* isuppz) {
    return LAPACKE_dsyevr(LAPACK_COL_MAJOR, jobz, 'I', 'U', n, a, n, 0, 0, il, iu, 0, m, w, z,
                          ldz, isuppz);
}
inline lapack_int call_syevr_index(char jobz, int n, std::complex<double>* a, int il, int iu,
                                   int* m, double* w, std::complex<double>* z, int ldz,
                                   int* isuppz) {
    return LAPACKE_zheevr(LAPACK_COL_MAJOR, jobz, 'I', 'U', n, a, n, 0, 0, il, iu, 0, m, w, z,
                          ldz, isuppz);
}

} // namespace detail

/// Full eigendecomposition of a self-adjoint matrix, ascending eigenvalues.
template <class S>
EigenDecomposition<S> symmetric_eigh(const SymmetricMatrix<S>& X) {
    const int n = X.n();
    EigenDecomposition<S> out;
    out.values.resize(n);
    out.vectors = X.dense(); // overwritten by the solver
    lapack_int info = detail::call_syevd('V', n, out.vectors.data(), out.values.data());
    if (info != 0)
        throw NonConvergence("symmetric_eigh: eigensolver failed, info=" + std::to_string(info));
    return out;
}

/// Eigenvalues only, ascending.
template <class S>
SpectrumVector symmetric_eigenvalues(const SymmetricMatrix<S>& X) {
    const int n = X.n();
    SpectrumVector out;
    out.values.resize(n);
    Matrix<S> work = X.dense();
    lapack_int info = detail::call_syevd('N', n, work.data(), out.values.data());
    if (info != 0)
        throw NonConvergence("symmetric_eigenvalues: eigensolver failed, info=" +
                             std::to_string(info));
    return out;
}

/// The k_low smallest and k_high largest eigenvalues, each ascending.
/// Index-range extraction (tridiagonalize once, bisection on the requested
/// indices) so asking for a few extremes never solves the full spectrum.
template <class S>
std::pair<std::vector<double>, std::vector<double>>
extreme_eigenvalues(const SymmetricMatrix<S>& X, int k_low, int k_high) {
    const int n = X.n();
    if (k_low + k_high > n) throw DimensionMismatch("extreme_eigenvalues: k_low + k_high > n");
    std::vector<double> low, high;
    std::vector<double> w(n);
    std::vector<int> isuppz(std::size_t(2) * n);
    if (k_low > 0) {
        Matrix<S> work = X.dense();
        int m = 0;
        lapack_int info = detail::call_syevr_index('N', n, work.data(), 1, k_low, &m, w.data(),
                                                   nullptr, 1, isuppz.data());
        if (info != 0) throw NonConvergence("extreme_eigenvalues: info=" + std::to_string(info));
        low.assign(w.begin(), w.begin() + m);
    }
    if (k_high > 0) {
        Matrix<S> work = X.dense();
        int m = 0;
        lapack_int info = detail::call_syevr_index('N', n, work.data(), n - k_high + 1, n, &m,
                                                   w.data(), nullptr, 1, isuppz.data());
        if (info != 0) throw NonConvergence("extreme_eigenvalues: info=" + std::to_string(info));
        high.assign(w.begin(), w.begin() + m);
    }
    return {std::move(low), std::move(high)};
}

/// Gram data of the raw family plus the triangular combination actually
/// applied. w_coeffs has unit diagonal: ortho vector i is the normalization
/// of sum_j w_coeffs(i,j) * raw_j.
template <class S> struct OrthonormalizationReport {
    Matrix<S> v_gram;   // V(i,j) = <raw_i, raw_j> / n
    Matrix<S> w_coeffs; // lower triangular, unit diagonal
    double min_gram_det = 0;
};

namespace detail {

/// Determinant by LU with partial pivoting; intended for small systems.
template <class S> S lu_det(Matrix<S> A) {
    const int n = A.rows();
    S det = S(1);
    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = scalar_traits<S>::abs2(A(k, k));
        for (int i = k + 1; i < n; ++i) {
            const double v = scalar_traits<S>::abs2(A(i, k));
            if (v > best) {
                best = v;
                piv = i;
            }
        }
        if (best == 0.0) return S(0);
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(A(k, j), A(piv, j));
            det = -det;
        }
        det *= A(k, k);
        for (int i = k + 1; i < n; ++i) {
            const S f = A(i, k) / A(k, k);
            for (int j = k + 1; j < n; ++j) A(i, j) -= f * A(k, j);
        }
    }
    return det;
}

/// Solves A x = b in place by LU with partial pivoting (small systems).
template <class S> std::vector<S> lu_solve(Matrix<S> A, std::vector<S> b) {
    const int n = A.rows();
    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = scalar_traits<S>::abs2(A(k, k));
        for (int i = k + 1; i < n; ++i) {
            const double v = scalar_traits<S>::abs2(A(i, k));
            if (v > best) {
                best = v;
                piv = i;
            }
        }
        if (best == 0.0) throw Error("lu_solve: singular matrix");
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(A(k, j), A(piv, j));
            std::swap(b[k], b[piv]);
        }
        for (int i = k + 1; i < n; ++i) {
            const S f = A(i, k) / A(k, k);
            b[i] -= f * b[k];
            for (int j = k + 1; j < n; ++j) A(i, j) -= f * A(k, j);
        }
    }
    for (int i = n - 1; i >= 0; --i) {
        S acc = b[i];
        for (int j = i + 1; j < n; ++j) acc -= A(i, j) * b[j];
        b[i] = acc / A(i, i);
    }
    return b;
}

} // namespace detail

/// Gram-Schmidt orthonormalization of r vectors of dimension n, with a
/// second orthogonalization pass for numerical safety. Throws
/// DegenerateFamily when a leading Gram minor falls below 1e-12; the caller
/// is expected to resample.
template <class S>
std::pair<std::vector<std::vector<S>>, OrthonormalizationReport<S>>
gram_schmidt(const std::vector<std::vector<S>>& raw) {
    const int r = int(raw.size());
    if (r == 0) return {{}, {}};
    const std::size_t n = raw[0].size();
    if (std::size_t(r) > n) throw DimensionMismatch("gram_schmidt: r > n");

    OrthonormalizationReport<S> rep;
    rep.v_gram = Matrix<S>(r, r);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) rep.v_gram(i, j) = inner(raw[i], raw[j]) / S(double(n));

    rep.min_gram_det = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= r; ++k) {
        Matrix<S> minor(k, k);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) minor(i, j) = rep.v_gram(i, j);
        const double d = scalar_traits<S>::real(detail::lu_det(std::move(minor)));
        rep.min_gram_det = std::min(rep.min_gram_det, d);
    }
    if (rep.min_gram_det < 1e-12)
        throw DegenerateFamily("gram_schmidt: leading Gram minor below 1e-12");

    // Unnormalized orthogonal family y_i = sum_j W(i,j) raw_j, W unit lower
    // triangular; outputs are the normalized y_i.
    rep.w_coeffs = Matrix<S>(r, r);
    std::vector<std::vector<S>> y(raw);
    std::vector<double> ynorm2(r, 0.0);
    for (int i = 0; i < r; ++i) rep.w_coeffs(i, i) = S(1);
    for (int i = 0; i < r; ++i) {
        for (int pass = 0; pass < 2; ++pass) {
            for (int j = 0; j < i; ++j) {
                const S c = inner(y[j], y[i]) / S(ynorm2[j]);
                for (std::size_t l = 0; l < n; ++l) y[i][l] -= c * y[j][l];
                for (int t = 0; t <= j; ++t) rep.w_coeffs(i, t) -= c * rep.w_coeffs(j, t);
            }
        }
        ynorm2[i] = norm2_sq(y[i]);
        if (!(ynorm2[i] > 0))
            throw DegenerateFamily("gram_schmidt: vanishing vector after projection");
    }

    std::vector<std::vector<S>> ortho(y);
    for (int i = 0; i < r; ++i) {
        const double s = 1.0 / std::sqrt(ynorm2[i]);
        for (std::size_t l = 0; l < n; ++l) ortho[i][l] *= S(s);
    }
    return {std::move(ortho), std::move(rep)};
}

} // namespace spikesim
