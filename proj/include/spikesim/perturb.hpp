// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "spikesim/errors.hpp"
#include "spikesim/laws.hpp"
#include "spikesim/linalg.hpp"
#include "spikesim/rng.hpp"
#include "spikesim/stieltjes.hpp"

namespace spikesim {

/// Spike strengths and sampling model for the finite-rank deformation.
struct PerturbationSpec {
    std::vector<double> thetas; // nondecreasing, all nonzero
    SpikeModel model = SpikeModel::orthonormalised;
    EntryLaw entry_law;

    int r() const { return int(thetas.size()); }
    int r0() const {
        int c = 0;
        for (double t : thetas) c += (t < 0);
        return c;
    }

    void validate() const {
        for (std::size_t i = 0; i < thetas.size(); ++i) {
            if (thetas[i] == 0) throw ConfigError("theta must be nonzero");
            if (i > 0 && thetas[i - 1] > thetas[i])
                throw ConfigError("thetas must be nondecreasing");
        }
    }
};

template <class S> struct SpikeVectors {
    std::vector<std::vector<S>> u; // r column vectors of dimension n
    SpikeModel model = SpikeModel::iid;
    std::optional<OrthonormalizationReport<S>> ortho_report;
};

/// Draws the spike vectors. In the i.i.d. model each u_i is a vector of
/// independent law entries scaled by 1/sqrt(n); in the orthonormalised model
/// the i.i.d. copies are Gram-Schmidt orthonormalised, resampling up to
/// three times if the family is numerically degenerate.
template <class S>
SpikeVectors<S> sample_spikes(int n, const PerturbationSpec& spec, rng::Stream& stream) {
    const int r = spec.r();
    if (r > n) throw DimensionMismatch("sample_spikes: r > n");
    SpikeVectors<S> out;
    out.model = spec.model;
    for (int attempt = 0;; ++attempt) {
        std::vector<std::vector<S>> raw(r, std::vector<S>(n));
        const double inv = 1.0 / std::sqrt(double(n));
        for (auto& v : raw)
            for (auto& x : v) x = detail::sample_entry<S>(spec.entry_law, stream) * S(inv);
        if (spec.model == SpikeModel::iid) {
            out.u = std::move(raw);
            return out;
        }
        try {
            auto [ortho, rep] = gram_schmidt(raw);
            out.u = std::move(ortho);
            out.ortho_report = std::move(rep);
            return out;
        } catch (const DegenerateFamily&) {
            if (attempt >= 3) throw;
        }
    }
}

/// Finite-rank self-adjoint deformation sum_i theta_i u_i u_i^*, kept in
/// factored form. Densification is explicit and intended for moderate n.
template <class S> struct LowRankOperator {
    std::vector<double> thetas;
    std::vector<std::vector<S>> u;

    int rank() const { return int(thetas.size()); }
    int n() const { return u.empty() ? 0 : int(u.front().size()); }

    SymmetricMatrix<S> densify() const {
        const int dim = n();
        if (dim == 0) throw DimensionMismatch("densify: empty operator");
        SymmetricMatrix<S> R(dim);
        for (int j = 0; j < dim; ++j)
            for (int i = 0; i <= j; ++i) {
                S acc{};
                for (int s = 0; s < rank(); ++s)
                    acc += S(thetas[s]) * u[s][i] * scalar_traits<S>::conj(u[s][j]);
                R.set_upper(i, j, acc);
            }
        return R;
    }
};

template <class S>
LowRankOperator<S> build_deformation(const SpikeVectors<S>& spikes,
                                     const PerturbationSpec& spec) {
    if (int(spikes.u.size()) != spec.r())
        throw DimensionMismatch("build_deformation: rank mismatch");
    return LowRankOperator<S>{spec.thetas, spikes.u};
}

/// X + sum theta_i u_i u_i^*.
template <class S>
SymmetricMatrix<S> apply_deformation(const SymmetricMatrix<S>& X, const LowRankOperator<S>& R) {
    if (R.rank() > 0 && R.n() != X.n())
        throw DimensionMismatch("apply_deformation: dimension mismatch");
    SymmetricMatrix<S> Y(X.n());
    for (int j = 0; j < X.n(); ++j)
        for (int i = 0; i <= j; ++i) {
            S acc = X(i, j);
            for (int s = 0; s < R.rank(); ++s)
                acc += S(R.thetas[s]) * R.u[s][i] * scalar_traits<S>::conj(R.u[s][j]);
            Y.set_upper(i, j, acc);
        }
    return Y;
}

} // namespace spikesim
