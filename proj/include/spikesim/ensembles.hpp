// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cblas.h>

#include <cmath>
#include <string>
#include <vector>

#include "spikesim/errors.hpp"
#include "spikesim/laws.hpp"
#include "spikesim/linalg.hpp"
#include "spikesim/rng.hpp"
#include "spikesim/stieltjes.hpp"

namespace spikesim {

/// Which matrix family a run draws from, plus its derived limit law.
struct EnsembleSpec {
    enum class Kind { wigner, wishart, iid_diagonal, quantile_deterministic };

    Kind kind = Kind::wigner;
    int n = 0;
    int m = 0;            // wishart second dimension
    double sigma = 1.0;   // wigner scale
    EntryLaw entry_law;
    LimitLaw given_limit = LimitLaw::semicircle(1.0); // iid_diagonal / quantile only

    double c_ratio() const { return double(n) / double(m); }

    LimitLaw limit() const {
        switch (kind) {
            case Kind::wigner: return LimitLaw::semicircle(sigma);
            case Kind::wishart: return LimitLaw::marchenko_pastur(c_ratio());
            case Kind::iid_diagonal:
            case Kind::quantile_deterministic: return given_limit;
        }
        return given_limit;
    }

    void validate() const {
        if (n < 1) throw ConfigError("ensemble: n >= 1 required");
        if (kind == Kind::wishart) {
            if (m <= 0) throw ConfigError("ensemble: wishart requires m");
            const double c = c_ratio();
            if (!(c > 0 && c < 1)) throw ConfigError("ensemble: wishart requires 0 < n/m < 1");
        }
        if (kind == Kind::wigner && !(sigma > 0))
            throw ConfigError("ensemble: wigner requires sigma > 0");
    }
};

inline double fourth_cumulant(const EntryLaw& law) { return law.kappa4(); }

/// Wigner matrix: off-diagonal entries sigma * nu / sqrt(n) i.i.d., diagonal
/// from the real version of the family with the same scaling.
template <class S>
SymmetricMatrix<S> sample_wigner(int n, double sigma, const EntryLaw& law, rng::Stream& stream) {
    if (n < 1) throw ConfigError("sample_wigner: n >= 1");
    SymmetricMatrix<S> X(n);
    const double scale = sigma / std::sqrt(double(n));
    const EntryLaw diag = law.real_version();
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < j; ++i)
            X.set_upper(i, j, detail::sample_entry<S>(law, stream) * S(scale));
        X.set_upper(j, j, S(diag.sample_real(stream) * scale));
    }
    return X;
}

namespace detail {

inline void gram_update(int n, int m, const double* g, double* out) {
    cblas_dsyrk(CblasColMajor, CblasUpper, CblasNoTrans, n, m, 1.0 / m, g, n, 0.0, out, n);
}
inline void gram_update(int n, int m, const std::complex<double>* g, std::complex<double>* out) {
    cblas_zherk(CblasColMajor, CblasUpper, CblasNoTrans, n, m, 1.0 / m, g, n, 0.0, out, n);
}

} // namespace detail

/// Wishart matrix G G^* / m with G an n x m i.i.d. nu matrix.
template <class S>
SymmetricMatrix<S> sample_wishart(int n, int m, const EntryLaw& law, rng::Stream& stream) {
    if (!(n >= 1 && n <= m)) throw ConfigError("sample_wishart: need 1 <= n <= m");
    Matrix<S> G(n, m);
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < n; ++i) G(i, j) = detail::sample_entry<S>(law, stream);
    SymmetricMatrix<S> X(n);
    detail::gram_update(n, m, G.data(), X.dense_mutable().data());
    X.finalize_from_upper();
    return X;
}

/// Deterministic spectrum realizing the limit law: lambda_i is the
/// (i - 1/2)/n quantile. Midpoint offsets keep lambda_n strictly inside the
/// support so empirical transforms stay finite arbitrarily close to b.
inline SpectrumVector quantile_spectrum(const LimitLaw& limit, int n) {
    SpectrumVector out;
    out.values.resize(n);
    for (int i = 0; i < n; ++i) out.values[i] = limit.quantile((i + 0.5) / double(n));
    std::sort(out.values.begin(), out.values.end());
    return out;
}

/// n i.i.d. draws from the limit measure, sorted.
inline SpectrumVector sample_iid_diagonal(const LimitLaw& limit, int n, rng::Stream& stream) {
    SpectrumVector out;
    out.values.resize(n);
    for (int i = 0; i < n; ++i) out.values[i] = limit.quantile(stream.uniform01());
    std::sort(out.values.begin(), out.values.end());
    return out;
}

} // namespace spikesim
