// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch.hpp>

#include <cmath>

#include "spikesim/perturb.hpp"
#include "spikesim/rng.hpp"

using namespace spikesim;

TEST_CASE("rademacher iid spikes have exactly unit norm") {
    PerturbationSpec ps;
    ps.thetas = {1.0};
    ps.model = SpikeModel::iid;
    ps.entry_law = EntryLaw(EntryLaw::Name::rademacher);
    rng::Stream s(5);
    auto spikes = sample_spikes<double>(64, ps, s);
    CHECK(norm2_sq(spikes.u[0]) == Approx(1.0).epsilon(1e-14));
}

TEST_CASE("gaussian iid spike norms concentrate") {
    PerturbationSpec ps;
    ps.thetas = {1.0};
    ps.model = SpikeModel::iid;
    ps.entry_law = EntryLaw(EntryLaw::Name::gaussian_real);
    int ok = 0;
    const int reps = 1000, n = 1000;
    for (int rep = 0; rep < reps; ++rep) {
        rng::Stream s(40000 + rep);
        auto spikes = sample_spikes<double>(n, ps, s);
        const double q = norm2_sq(spikes.u[0]);
        if (q >= 0.85 && q <= 1.15) ++ok;
    }
    CHECK(ok >= 990);
}

TEST_CASE("orthonormalised spikes have identity gram matrix") {
    PerturbationSpec ps;
    ps.thetas = {-1.0, 0.5, 2.0};
    ps.model = SpikeModel::orthonormalised;
    ps.entry_law = EntryLaw(EntryLaw::Name::uniform_sym);
    rng::Stream s(6);
    auto spikes = sample_spikes<double>(50, ps, s);
    REQUIRE(spikes.ortho_report.has_value());
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double want = i == j ? 1.0 : 0.0;
            CHECK(std::abs(inner(spikes.u[i], spikes.u[j]) - want) <= 1e-10);
        }
}

TEST_CASE("rotation covariance of orthonormalised gaussian spikes") {
    // E |<u_1, e_1>|^2 = 1/n for uniform sphere vectors
    const int n = 200, reps = 2000;
    PerturbationSpec ps;
    ps.thetas = {1.0};
    ps.model = SpikeModel::orthonormalised;
    ps.entry_law = EntryLaw(EntryLaw::Name::gaussian_real);
    double acc = 0;
    for (int rep = 0; rep < reps; ++rep) {
        rng::Stream s(70000 + rep);
        auto spikes = sample_spikes<double>(n, ps, s);
        acc += spikes.u[0][0] * spikes.u[0][0];
    }
    acc /= reps;
    CHECK(acc == Approx(1.0 / n).epsilon(0.2));
}

TEST_CASE("rank-one deformation dense form") {
    LowRankOperator<double> R;
    R.thetas = {1.0};
    R.u = {{1.0, 0.0}};
    auto D = R.densify();
    CHECK(D(0, 0) == 1.0);
    CHECK(D(0, 1) == 0.0);
    CHECK(D(1, 1) == 0.0);
}

TEST_CASE("deformation trace identity for rademacher spikes") {
    PerturbationSpec ps;
    ps.thetas = {-0.5, 2.0};
    ps.model = SpikeModel::iid;
    ps.entry_law = EntryLaw(EntryLaw::Name::rademacher);
    rng::Stream s(8);
    auto spikes = sample_spikes<double>(40, ps, s);
    auto R = build_deformation(spikes, ps);
    auto D = R.densify();
    double tr = 0;
    for (int i = 0; i < 40; ++i) tr += D(i, i);
    CHECK(tr == Approx(-0.5 + 2.0).epsilon(1e-12)); // |u|^2 = 1 exactly
}

TEST_CASE("numerical rank of the dense form stays at most r") {
    PerturbationSpec ps;
    ps.thetas = {-1.0, 1.5, 3.0};
    ps.model = SpikeModel::iid;
    ps.entry_law = EntryLaw(EntryLaw::Name::gaussian_real);
    rng::Stream s(9);
    const int n = 40;
    auto spikes = sample_spikes<double>(n, ps, s);
    auto D = build_deformation(spikes, ps).densify();
    auto ev = symmetric_eigenvalues(D).values;
    int nonzero = 0;
    for (double v : ev) nonzero += (std::abs(v) > 1e-10);
    CHECK(nonzero <= 3);
}

TEST_CASE("apply_deformation hand oracle and empty case") {
    auto X = RealSymmetric::diagonal({-1.0, 1.0});
    LowRankOperator<double> empty;
    auto same = apply_deformation(X, empty);
    CHECK(same(0, 0) == -1.0);
    CHECK(same(1, 1) == 1.0);

    LowRankOperator<double> R;
    R.thetas = {1.0};
    const double s = 1.0 / std::sqrt(2.0);
    R.u = {{s, s}};
    auto Y = apply_deformation(X, R);
    CHECK(Y(0, 0) == Approx(-0.5));
    CHECK(Y(0, 1) == Approx(0.5));
    CHECK(Y(1, 1) == Approx(1.5));
    auto ev = symmetric_eigenvalues(Y).values;
    CHECK(ev[0] == Approx((1.0 - std::sqrt(5.0)) / 2).epsilon(1e-12));
    CHECK(ev[1] == Approx((1.0 + std::sqrt(5.0)) / 2).epsilon(1e-12));
}

TEST_CASE("weyl interlacing for positive rank-one updates") {
    rng::Stream s(11);
    for (int rep = 0; rep < 10; ++rep) {
        const int n = 20 + int(s.next_u64() % 80);
        RealSymmetric X(n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i <= j; ++i) X.set_upper(i, j, s.gaussian() / std::sqrt(double(n)));
        PerturbationSpec ps;
        ps.thetas = {0.8};
        ps.model = SpikeModel::iid;
        ps.entry_law = EntryLaw(EntryLaw::Name::gaussian_real);
        auto spikes = sample_spikes<double>(n, ps, s);
        auto Y = apply_deformation(X, build_deformation(spikes, ps));
        auto lx = symmetric_eigenvalues(X).values;
        auto ly = symmetric_eigenvalues(Y).values;
        for (int i = 0; i < n; ++i) {
            REQUIRE(lx[i] <= ly[i] + 1e-11);
            if (i + 1 < n) REQUIRE(ly[i] <= lx[i + 1] + 1e-11);
        }
    }
}

TEST_CASE("deformation commutes with orthogonal conjugation") {
    rng::Stream s(13);
    const int n = 24;
    RealSymmetric X(n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i <= j; ++i) X.set_upper(i, j, s.gaussian());
    // orthogonal Q from the eigenbasis of another random symmetric matrix
    RealSymmetric M(n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i <= j; ++i) M.set_upper(i, j, s.gaussian());
    auto Q = symmetric_eigh(M).vectors;

    PerturbationSpec ps;
    ps.thetas = {-1.0, 2.0};
    ps.model = SpikeModel::iid;
    ps.entry_law = EntryLaw(EntryLaw::Name::gaussian_real);
    auto spikes = sample_spikes<double>(n, ps, s);
    auto R = build_deformation(spikes, ps);

    // conjugate then deform
    auto conj_mat = [&](const RealSymmetric& A) {
        RealSymmetric B(n);
        std::vector<double> tmp(n);
        Matrix<double> AQ(n, n);
        for (int j = 0; j < n; ++j) {
            matvec(A.dense(), Q.col(j), tmp.data());
            for (int i = 0; i < n; ++i) AQ(i, j) = tmp[i];
        }
        for (int j = 0; j < n; ++j)
            for (int i = 0; i <= j; ++i) {
                double acc = 0;
                for (int l = 0; l < n; ++l) acc += Q(l, i) * AQ(l, j);
                B.set_upper(i, j, acc);
            }
        return B;
    };
    LowRankOperator<double> Rq;
    Rq.thetas = R.thetas;
    Rq.u.resize(R.rank(), std::vector<double>(n));
    for (int r = 0; r < R.rank(); ++r) matvec_adjoint(Q, R.u[r].data(), Rq.u[r].data());

    auto left = conj_mat(apply_deformation(X, R));
    auto right = apply_deformation(conj_mat(X), Rq);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i <= j; ++i) REQUIRE(std::abs(left(i, j) - right(i, j)) <= 1e-10);
}

TEST_CASE("degenerate family escalates after three resamples") {
    // n = r = 1 with rademacher entries is fine; force degeneracy with r = 2
    // in dimension 1 is forbidden by r <= n, so use duplicated directions:
    // dimension 2 with three spikes cannot be orthonormalised.
    PerturbationSpec ps;
    ps.thetas = {1.0, 2.0, 3.0};
    ps.model = SpikeModel::orthonormalised;
    ps.entry_law = EntryLaw(EntryLaw::Name::rademacher);
    rng::Stream s(21);
    CHECK_THROWS_AS((sample_spikes<double>(2, ps, s)), DimensionMismatch);
    // r = n = 2 rademacher: repeated draws eventually collide, but the
    // resample loop must cap at three attempts rather than spin forever.
    PerturbationSpec ps2;
    ps2.thetas = {1.0, 2.0};
    ps2.model = SpikeModel::orthonormalised;
    ps2.entry_law = EntryLaw(EntryLaw::Name::rademacher);
    int threw = 0, fine = 0;
    for (int rep = 0; rep < 200; ++rep) {
        rng::Stream t(100 + rep);
        try {
            auto sp = sample_spikes<double>(2, ps2, t);
            ++fine;
        } catch (const DegenerateFamily&) {
            ++threw;
        }
    }
    // in dimension 2 a rademacher pair is colinear with probability 1/2,
    // so four failures in a row happen for some seeds
    CHECK(threw > 0);
    CHECK(fine > 0);
}
