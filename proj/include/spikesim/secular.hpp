// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "spikesim/errors.hpp"
#include "spikesim/linalg.hpp"
#include "spikesim/matrix.hpp"
#include "spikesim/perturb.hpp"

namespace spikesim {

/// Spectral data of X expressed for the deformation: eigs are the sorted
/// eigenvalues, weights row s holds the spike coordinates in the eigenbasis,
/// w[s][l] = (O u_s)_l.
template <class S> struct SecularSystem {
    std::vector<double> eigs;
    std::vector<std::vector<S>> weights;
    std::vector<double> thetas;

    int n() const { return int(eigs.size()); }
    int r() const { return int(thetas.size()); }
};

/// Builds the system from a dense eigendecomposition of X.
template <class S>
SecularSystem<S> make_secular_system(const EigenDecomposition<S>& ed,
                                     const LowRankOperator<S>& R) {
    SecularSystem<S> sys;
    sys.eigs = ed.values;
    sys.thetas = R.thetas;
    const int n = int(ed.values.size());
    sys.weights.resize(R.rank(), std::vector<S>(n));
    for (int s = 0; s < R.rank(); ++s) matvec_adjoint(ed.vectors, R.u[s].data(), sys.weights[s].data());
    return sys;
}

/// Diagonal X: the eigenbasis is the identity, so the weights are the spike
/// coordinates themselves.
template <class S>
SecularSystem<S> make_secular_system(const SpectrumVector& spectrum, const LowRankOperator<S>& R) {
    SecularSystem<S> sys;
    sys.eigs = spectrum.values;
    sys.thetas = R.thetas;
    sys.weights = R.u;
    return sys;
}

/// M(z)[s][t] = sum_l conj(w_s_l) w_t_l / (z - lambda_l) - delta_st / theta_s.
template <class S>
Matrix<S> resolvent_matrix(const SecularSystem<S>& sys, double z) {
    const int n = sys.n(), r = sys.r();
    for (double l : sys.eigs)
        if (std::abs(z - l) < 1e-14 * (1 + std::abs(z)))
            throw PoleHit("resolvent_matrix: z hits an eigenvalue of X");
    Matrix<S> M(r, r);
    std::vector<double> inv(n);
    for (int l = 0; l < n; ++l) inv[l] = 1.0 / (z - sys.eigs[l]);
    for (int s = 0; s < r; ++s)
        for (int t = s; t < r; ++t) {
            S acc{};
            for (int l = 0; l < n; ++l)
                acc += scalar_traits<S>::conj(sys.weights[s][l]) * sys.weights[t][l] * S(inv[l]);
            M(s, t) = acc;
            M(t, s) = scalar_traits<S>::conj(acc);
        }
    for (int s = 0; s < r; ++s) M(s, s) -= S(1.0 / sys.thetas[s]);
    return M;
}

/// f(z) = det M(z). M is Hermitian for real z, so the determinant is real.
template <class S>
double secular_value(const SecularSystem<S>& sys, double z) {
    return scalar_traits<S>::real(detail::lu_det(resolvent_matrix(sys, z)));
}

/// Relative residual of the determinant identity
///   det(z - X - V D V^*) = det(z - X) det(D) det(D^{-1} - V^*(z - X)^{-1} V)
/// with both sides evaluated by independent dense LU factorizations.
template <class S>
double det_identity_residual(const SymmetricMatrix<S>& X, const Matrix<S>& V,
                             const std::vector<double>& thetas, double z) {
    const int n = X.n(), r = int(thetas.size());
    Matrix<S> ZX(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) ZX(i, j) = (i == j ? S(z) : S{}) - X(i, j);

    // left side
    Matrix<S> L = ZX;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            S acc{};
            for (int s = 0; s < r; ++s)
                acc += S(thetas[s]) * V(i, s) * scalar_traits<S>::conj(V(j, s));
            L(i, j) -= acc;
        }
    const S lhs = detail::lu_det(std::move(L));

    // right side
    S det_zx = detail::lu_det(ZX);
    S det_d = S(1);
    for (double t : thetas) det_d *= S(t);
    Matrix<S> inner_m(r, r);
    for (int s = 0; s < r; ++s) {
        std::vector<S> col(n);
        for (int i = 0; i < n; ++i) col[i] = V(i, s);
        auto x = detail::lu_solve(ZX, std::move(col)); // (z-X)^{-1} v_s
        for (int t = 0; t < r; ++t) {
            S acc{};
            for (int i = 0; i < n; ++i) acc += scalar_traits<S>::conj(V(i, t)) * x[i];
            inner_m(t, s) = -acc;
        }
    }
    for (int s = 0; s < r; ++s) inner_m(s, s) += S(1.0 / thetas[s]);
    const S rhs = det_zx * det_d * detail::lu_det(std::move(inner_m));

    const double denom = std::max(1.0, std::sqrt(scalar_traits<S>::abs2(lhs)));
    return std::sqrt(scalar_traits<S>::abs2(lhs - rhs)) / denom;
}

enum class SolveMethod { dense, secular_rank1, detroot };

/// Sorted eigenvalues of the deformed matrix with the solver path recorded.
struct DeformedSpectrum {
    std::vector<double> values;
    SolveMethod method = SolveMethod::dense;
};

namespace detail {

/// Rank-one pole data after coalescing equal eigenvalues and deflating
/// negligible weights.
struct RankOnePoles {
    std::vector<double> d;      // strictly increasing pole locations
    std::vector<double> v;      // positive weight mass per pole
    std::vector<double> passthrough; // eigenvalues of X that survive unchanged
    double total_mass = 0;
};

inline RankOnePoles prepare_rank_one(const std::vector<double>& eigs,
                                     const std::vector<double>& w_abs2) {
    RankOnePoles out;
    const int n = int(eigs.size());
    double mass = 0;
    for (double w : w_abs2) mass += w;
    out.total_mass = mass;
    const double deflate = 1e-14 * mass;
    int i = 0;
    while (i < n) {
        int j = i;
        double wsum = 0;
        // coalesce eigenvalues equal within 1e-12 relative
        while (j < n && eigs[j] - eigs[i] <= 1e-12 * (1 + std::abs(eigs[i]))) {
            wsum += w_abs2[j];
            ++j;
        }
        const int mult = j - i;
        // multiplicity minus one copies stay eigenvalues of the deformation
        for (int k = 1; k < mult; ++k) out.passthrough.push_back(eigs[i]);
        if (wsum <= deflate) {
            out.passthrough.push_back(eigs[i]);
        } else {
            out.d.push_back(eigs[i]);
            out.v.push_back(wsum);
        }
        i = j;
    }
    return out;
}

/// One root of f(z) = sum v/(z-d) - 1/theta on the open interval (lo, hi),
/// where f decreases from +inf at lo to f(hi) (with hi possibly a pole where
/// f -> -inf, or a plain bracket endpoint with f(hi) <= 0). Bisection to
/// width 1e-13 * (1+|z|), then up to three Newton polish steps that must stay
/// inside the bracket.
inline double rank_one_root(const RankOnePoles& p, double theta, double lo, double hi) {
    const auto f = [&](double z) {
        double acc = -1.0 / theta;
        for (std::size_t l = 0; l < p.d.size(); ++l) acc += p.v[l] / (z - p.d[l]);
        return acc;
    };
    double zl = lo, zr = hi;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (zl + zr);
        if (mid <= zl || mid >= zr) break;
        if (f(mid) >= 0)
            zl = mid;
        else
            zr = mid;
        if (zr - zl <= 1e-13 * (1 + std::abs(mid))) break;
    }
    if (!(zl >= lo && zr <= hi))
        throw BracketFailure("rank_one_root: bracket escaped the interval");
    double z = 0.5 * (zl + zr);
    for (int it = 0; it < 3; ++it) {
        double fv = -1.0 / theta, fp = 0;
        for (std::size_t l = 0; l < p.d.size(); ++l) {
            const double inv = 1.0 / (z - p.d[l]);
            fv += p.v[l] * inv;
            fp -= p.v[l] * inv * inv;
        }
        const double step = fv / fp;
        const double cand = z - step;
        if (!(cand > zl - (zr - zl) && cand < zr + (zr - zl)) || !std::isfinite(cand)) {
            z = 0.5 * (zl + zr);
            break;
        }
        z = cand;
    }
    if (!(z > lo && z < hi)) z = 0.5 * (zl + zr);
    return z;
}

} // namespace detail

/// All eigenvalues of X + theta u u^* from the interlacing structure of the
/// rank-one secular equation, or only the k_low smallest / k_high largest
/// when requested (k_low = k_high = -1 solves everything). Deflated
/// coordinates pass through unchanged.
inline DeformedSpectrum solve_rank_one(const std::vector<double>& eigs,
                                       const std::vector<double>& w_abs2, double theta,
                                       int k_low = -1, int k_high = -1) {
    if (eigs.size() != w_abs2.size())
        throw DimensionMismatch("solve_rank_one: weight/eigenvalue size mismatch");
    if (theta == 0) throw ConfigError("solve_rank_one: theta must be nonzero");
    const auto p = detail::prepare_rank_one(eigs, w_abs2);
    const int m = int(p.d.size());
    bool full = k_low < 0 && k_high < 0;
    if (!full) {
        k_low = std::max(k_low, 0);
        k_high = std::max(k_high, 0);
        // with as many requested values as distinct poles the partial path
        // has no savings and the bookkeeping gets degenerate
        if (k_low >= m || k_high >= m) full = true;
    }
    const int n = int(eigs.size());

    DeformedSpectrum out;
    out.method = SolveMethod::secular_rank1;
    if (m == 0) { // zero spike mass: spectrum unchanged
        out.values = eigs;
        if (k_low >= 0 || k_high >= 0) {
            std::vector<double> vals;
            for (int i = 0; i < std::min(std::max(k_low, 0), n); ++i) vals.push_back(eigs[i]);
            for (int i = std::max(0, n - std::max(k_high, 0)); i < n; ++i)
                vals.push_back(eigs[i]);
            out.values = vals;
        }
        return out;
    }

    // gap indices to solve: gap g is (d_g, d_{g+1}) for g in [0, m-2];
    // the outer root lives above d_{m-1} (theta > 0) or below d_0 (theta < 0)
    std::vector<double> roots;
    const double scale = 1 + std::abs(p.d.front()) + std::abs(p.d.back());
    auto solve_gap = [&](int g) {
        roots.push_back(detail::rank_one_root(p, theta, p.d[g], p.d[g + 1]));
    };
    auto solve_outer = [&]() {
        if (theta > 0) {
            double hi = p.d.back() + theta * p.total_mass + 1e-12 * scale;
            roots.push_back(detail::rank_one_root(p, theta, p.d.back(), hi));
        } else {
            double lo = p.d.front() + theta * p.total_mass - 1e-12 * scale;
            roots.push_back(detail::rank_one_root(p, theta, lo, p.d.front()));
        }
    };

    if (full) {
        for (int g = 0; g < m - 1; ++g) solve_gap(g);
        solve_outer();
        out.values = roots;
        out.values.insert(out.values.end(), p.passthrough.begin(), p.passthrough.end());
        std::sort(out.values.begin(), out.values.end());
        if (k_low >= 0 || k_high >= 0) {
            std::vector<double> vals;
            const int total = int(out.values.size());
            for (int i = 0; i < std::min(k_low, total); ++i) vals.push_back(out.values[i]);
            for (int i = std::max(0, total - k_high); i < total; ++i)
                vals.push_back(out.values[i]);
            out.values = vals;
        }
        return out;
    }

    // extremes only: every deformed eigenvalue below d_{k} (resp. above
    // d_{m-1-k}) is either a root of one of the outermost k gaps, the outer
    // root, or a passthrough value in that range; gather and trim.
    std::vector<double> low_vals, high_vals;
    if (k_low > 0) {
        const int gaps = std::min(k_low, m - 1);
        std::vector<double> cand;
        for (int g = 0; g < gaps; ++g)
            cand.push_back(detail::rank_one_root(p, theta, p.d[g], p.d[g + 1]));
        if (theta < 0) {
            double lo = p.d.front() + theta * p.total_mass - 1e-12 * scale;
            cand.push_back(detail::rank_one_root(p, theta, lo, p.d.front()));
        }
        const double cutoff = (gaps < m - 1) ? p.d[gaps] : std::numeric_limits<double>::infinity();
        for (double v : p.passthrough)
            if (v <= cutoff) cand.push_back(v);
        std::sort(cand.begin(), cand.end());
        cand.resize(std::min<std::size_t>(cand.size(), std::size_t(k_low)));
        low_vals = cand;
    }
    if (k_high > 0) {
        const int gaps = std::min(k_high, m - 1);
        std::vector<double> cand;
        for (int g = m - 1 - gaps; g < m - 1; ++g)
            cand.push_back(detail::rank_one_root(p, theta, p.d[g], p.d[g + 1]));
        if (theta > 0) {
            double hi = p.d.back() + theta * p.total_mass + 1e-12 * scale;
            cand.push_back(detail::rank_one_root(p, theta, p.d.back(), hi));
        }
        const double cutoff = (gaps < m - 1) ? p.d[m - 1 - gaps] : -std::numeric_limits<double>::infinity();
        for (double v : p.passthrough)
            if (v >= cutoff) cand.push_back(v);
        std::sort(cand.begin(), cand.end());
        if (cand.size() > std::size_t(k_high))
            cand.erase(cand.begin(), cand.end() - k_high);
        high_vals = cand;
    }
    out.values = low_vals;
    out.values.insert(out.values.end(), high_vals.begin(), high_vals.end());
    return out;
}

template <class S>
DeformedSpectrum solve_rank_one(const SecularSystem<S>& sys, int k_low = -1, int k_high = -1) {
    if (sys.r() != 1) throw DimensionMismatch("solve_rank_one: system rank must be 1");
    std::vector<double> w2(sys.n());
    for (int l = 0; l < sys.n(); ++l) w2[l] = scalar_traits<S>::abs2(sys.weights[0][l]);
    return solve_rank_one(sys.eigs, w2, sys.thetas[0], k_low, k_high);
}

/// Zeros of det M(z) inside a window disjoint from [lambda_1, lambda_n]:
/// sign scan on a 1e-3 grid refined by bisection. Off the spectrum the
/// deviating eigenvalues of the deformation are exactly these zeros.
template <class S>
std::vector<double> solve_outliers_rank_r(const SecularSystem<S>& sys, double w_lo, double w_hi) {
    if (w_lo >= w_hi) throw ConfigError("solve_outliers_rank_r: empty window");
    if (!(w_hi < sys.eigs.front() || w_lo > sys.eigs.back()))
        throw WindowTouchesSpectrum("solve_outliers_rank_r: window touches [lambda_1, lambda_n]");
    const double step = 1e-3;
    std::vector<double> roots;
    double z0 = w_lo;
    double f0 = secular_value(sys, z0);
    while (z0 < w_hi) {
        const double z1 = std::min(z0 + step, w_hi);
        const double f1 = secular_value(sys, z1);
        if (f0 == 0.0) {
            roots.push_back(z0);
        } else if (f0 * f1 < 0) {
            double lo = z0, hi = z1, flo = f0;
            for (int it = 0; it < 100; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (mid <= lo || mid >= hi) break;
                const double fm = secular_value(sys, mid);
                if (fm == 0.0) {
                    lo = hi = mid;
                    break;
                }
                if ((flo < 0) == (fm < 0)) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
                if (hi - lo <= 1e-13 * (1 + std::abs(mid))) break;
            }
            roots.push_back(0.5 * (lo + hi));
        }
        z0 = z1;
        f0 = f1;
    }
    return roots;
}

/// Dense oracle path: eigenvalues of the materialized deformation.
template <class S>
DeformedSpectrum deformed_spectrum_dense(const SymmetricMatrix<S>& X, const LowRankOperator<S>& R) {
    DeformedSpectrum out;
    out.method = SolveMethod::dense;
    out.values = symmetric_eigenvalues(apply_deformation(X, R)).values;
    return out;
}

} // namespace spikesim
