// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch.hpp>

#include <cmath>
#include <complex>

#include "spikesim/rng.hpp"
#include "spikesim/secular.hpp"

using namespace spikesim;
using cplx = std::complex<double>;

namespace {

RealSymmetric random_symmetric(int n, rng::Stream& s, double scale = 1.0) {
    RealSymmetric X(n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i <= j; ++i) X.set_upper(i, j, scale * s.gaussian());
    return X;
}

} // namespace

TEST_CASE("resolvent matrix on the 1x1 toy") {
    SecularSystem<double> sys;
    sys.eigs = {0.0};
    sys.weights = {{1.0}};
    sys.thetas = {1.0};
    auto M2 = resolvent_matrix(sys, 2.0);
    CHECK(M2(0, 0) == Approx(-0.5));
    CHECK(secular_value(sys, 2.0) == Approx(-0.5));
    auto M1 = resolvent_matrix(sys, 1.0);
    CHECK(M1(0, 0) == Approx(0.0).margin(1e-15)); // z = 1 is the deformed eigenvalue
    CHECK_THROWS_AS(resolvent_matrix(sys, 0.0), PoleHit);
}

TEST_CASE("resolvent matrix is hermitian for real z") {
    rng::Stream s(31);
    const int n = 12, r = 3;
    SecularSystem<cplx> sys;
    sys.eigs.resize(n);
    for (int i = 0; i < n; ++i) sys.eigs[i] = -1.0 + 2.0 * i / (n - 1);
    sys.thetas = {-1.5, 0.7, 2.0};
    sys.weights.assign(r, std::vector<cplx>(n));
    for (auto& row : sys.weights)
        for (auto& w : row) w = cplx(s.gaussian(), s.gaussian()) / std::sqrt(2.0 * n);
    auto M = resolvent_matrix(sys, 3.1);
    for (int a = 0; a < r; ++a)
        for (int b = 0; b < r; ++b)
            CHECK(std::abs(M(a, b) - std::conj(M(b, a))) <= 1e-12);
}

TEST_CASE("secular value tends to prod(-1/theta) at infinity") {
    rng::Stream s(33);
    const int n = 20, r = 3;
    SecularSystem<double> sys;
    sys.eigs.resize(n);
    for (int i = 0; i < n; ++i) sys.eigs[i] = s.gaussian();
    std::sort(sys.eigs.begin(), sys.eigs.end());
    sys.thetas = {-2.0, 0.5, 1.5};
    sys.weights.assign(r, std::vector<double>(n));
    for (auto& row : sys.weights)
        for (auto& w : row) w = s.gaussian() / std::sqrt(double(n));
    const double z = sys.eigs.back() + 1e6;
    double expect = 1;
    for (double t : sys.thetas) expect *= -1.0 / t;
    CHECK(secular_value(sys, z) == Approx(expect).epsilon(1e-4));
}

TEST_CASE("determinant identity residual: scalar case is exact") {
    RealSymmetric X(1);
    X.set_upper(0, 0, 0.7);
    Matrix<double> V(1, 1);
    V(0, 0) = 0.3;
    CHECK(det_identity_residual(X, V, {2.0}, 1.9) <= 1e-14);
}

TEST_CASE("determinant identity residual on random real and complex instances") {
    rng::Stream s(35);
    for (int rep = 0; rep < 500; ++rep) {
        const int n = 2 + int(s.next_u64() % 15);
        const int r = 1 + int(s.next_u64() % std::min(4, n));
        auto X = random_symmetric(n, s);
        Matrix<double> V(n, r);
        for (int j = 0; j < r; ++j)
            for (int i = 0; i < n; ++i) V(i, j) = s.gaussian();
        std::vector<double> thetas(r);
        for (double& t : thetas) t = s.gaussian() + (s.next_u64() & 1 ? 2.5 : -2.5);
        const double z = 10.0 + 5.0 * s.uniform01(); // above the spectrum w.h.p.
        REQUIRE(det_identity_residual(X, V, thetas, z) <= 1e-9);
    }
    for (int rep = 0; rep < 500; ++rep) {
        const int n = 2 + int(s.next_u64() % 7);
        const int r = 1 + int(s.next_u64() % std::min(3, n));
        ComplexHermitian X(n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i <= j; ++i)
                X.set_upper(i, j, i == j ? cplx(s.gaussian(), 0) : cplx(s.gaussian(), s.gaussian()));
        Matrix<cplx> V(n, r);
        for (int j = 0; j < r; ++j)
            for (int i = 0; i < n; ++i) V(i, j) = cplx(s.gaussian(), s.gaussian());
        std::vector<double> thetas(r);
        for (double& t : thetas) t = s.gaussian() + (s.next_u64() & 1 ? 3.0 : -3.0);
        const double z = 20.0 + 5.0 * s.uniform01();
        REQUIRE(det_identity_residual(X, V, thetas, z) <= 1e-9);
    }
}

TEST_CASE("rank-one solve on the 2x2 hand oracle") {
    // X = diag(-1,1), u = (1,1)/sqrt(2), theta = 2 -> eigenvalues 1 -+ sqrt(2)
    auto res = solve_rank_one({-1.0, 1.0}, {0.5, 0.5}, 2.0);
    REQUIRE(res.values.size() == 2);
    CHECK(res.values[0] == Approx(1.0 - std::sqrt(2.0)).epsilon(1e-12));
    CHECK(res.values[1] == Approx(1.0 + std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("rank-one solve with a decoupled coordinate") {
    // u = e_1 on a diagonal matrix: lambda_1 -> lambda_1 + theta, rest unchanged
    auto res = solve_rank_one({-2.0, 0.5, 3.0}, {1.0, 0.0, 0.0}, 0.7);
    REQUIRE(res.values.size() == 3);
    CHECK(res.values[0] == Approx(-1.3).epsilon(1e-12));
    CHECK(res.values[1] == Approx(0.5));
    CHECK(res.values[2] == Approx(3.0));
}

TEST_CASE("rank-one secular agrees with the dense path on large instances") {
    rng::Stream s(37);
    for (double theta : {1.5, -0.8, 0.4}) {
        const int n = 300;
        auto X = random_symmetric(n, s, 1.0 / std::sqrt(double(n)));
        PerturbationSpec ps;
        ps.thetas = {theta};
        ps.model = SpikeModel::iid;
        ps.entry_law = EntryLaw(EntryLaw::Name::gaussian_real);
        auto spikes = sample_spikes<double>(n, ps, s);
        auto R = build_deformation(spikes, ps);

        auto ed = symmetric_eigh(X);
        auto sys = make_secular_system(ed, R);
        auto sec = solve_rank_one(sys);
        auto dense = deformed_spectrum_dense(X, R);
        REQUIRE(sec.values.size() == dense.values.size());
        const double tol = 1e-9 * (1 + X.max_abs());
        double worst = 0;
        for (std::size_t i = 0; i < sec.values.size(); ++i)
            worst = std::max(worst, std::abs(sec.values[i] - dense.values[i]));
        REQUIRE(worst <= tol);

        // rank-one Weyl interlacing as orderings
        auto& lx = ed.values;
        for (int i = 0; i < n; ++i) {
            if (theta > 0) {
                REQUIRE(lx[i] <= sec.values[i] + 1e-12);
                if (i + 1 < n) REQUIRE(sec.values[i] <= lx[i + 1] + 1e-12);
            } else {
                REQUIRE(sec.values[i] <= lx[i] + 1e-12);
                if (i > 0) REQUIRE(lx[i - 1] <= sec.values[i] + 1e-12);
            }
        }

        // trace identity
        double tr_shift = 0;
        for (std::size_t i = 0; i < sec.values.size(); ++i)
            tr_shift += sec.values[i] - lx[i];
        CHECK(tr_shift == Approx(theta * norm2_sq(spikes.u[0])).margin(1e-8 * n));
    }
}

TEST_CASE("extremes-only rank-one solve matches the full solve") {
    rng::Stream s(39);
    const int n = 400;
    std::vector<double> eigs(n), w2(n);
    for (int i = 0; i < n; ++i) eigs[i] = s.gaussian();
    std::sort(eigs.begin(), eigs.end());
    double mass = 0;
    for (int i = 0; i < n; ++i) {
        const double x = s.gaussian();
        w2[i] = x * x / n;
        mass += w2[i];
    }
    for (double theta : {2.5, -1.7}) {
        auto full = solve_rank_one(eigs, w2, theta);
        auto part = solve_rank_one(eigs, w2, theta, 6, 6);
        REQUIRE(part.values.size() == 12);
        for (int i = 0; i < 6; ++i) {
            CHECK(part.values[i] == Approx(full.values[i]).margin(1e-12));
            CHECK(part.values[6 + i] == Approx(full.values[n - 6 + i]).margin(1e-12));
        }
    }
}

TEST_CASE("rank-one solve handles repeated eigenvalues") {
    // triple eigenvalue at 0: two copies must survive as deformed eigenvalues
    auto res = solve_rank_one({0.0, 0.0, 0.0, 1.0}, {0.1, 0.2, 0.3, 0.4}, 1.0);
    REQUIRE(res.values.size() == 4);
    int zeros = 0;
    for (double v : res.values) zeros += (v == 0.0);
    CHECK(zeros == 2);
    // trace identity pins the two genuine roots
    double sum = 0;
    for (double v : res.values) sum += v;
    CHECK(sum == Approx(1.0 + 1.0).epsilon(1e-10));
}

TEST_CASE("detroot outliers reduce to the rank-one root") {
    rng::Stream s(41);
    const int n = 200;
    SecularSystem<double> sys;
    sys.eigs.resize(n);
    for (int i = 0; i < n; ++i) sys.eigs[i] = -2.0 + 4.0 * (i + 0.5) / n;
    sys.thetas = {1.8};
    sys.weights.assign(1, std::vector<double>(n));
    for (auto& w : sys.weights[0]) w = s.gaussian() / std::sqrt(double(n));
    auto one = solve_rank_one(sys, 0, 1);
    auto roots = solve_outliers_rank_r(sys, sys.eigs.back() + 1e-6, sys.eigs.back() + 5.0);
    REQUIRE(roots.size() == 1);
    CHECK(roots[0] == Approx(one.values.back()).margin(1e-10));
}

TEST_CASE("detroot finds both outliers of a rank-two deformation") {
    rng::Stream s(43);
    const int n = 500;
    SecularSystem<double> sys;
    sys.eigs.resize(n);
    auto sc = [&](int i) { return -2.0 + 4.0 * (i + 0.5) / n; };
    for (int i = 0; i < n; ++i) sys.eigs[i] = sc(i);
    sys.thetas = {1.5, 2.0};
    sys.weights.assign(2, std::vector<double>(n));
    for (auto& row : sys.weights)
        for (auto& w : row) w = s.gaussian() / std::sqrt(double(n));
    auto roots = solve_outliers_rank_r(sys, sys.eigs.back() + 1e-6, 4.0);
    REQUIRE(roots.size() == 2);
    // compare against the dense oracle on the diagonal realization
    auto X = RealSymmetric::diagonal(sys.eigs);
    LowRankOperator<double> R{sys.thetas, sys.weights};
    auto dense = deformed_spectrum_dense(X, R);
    CHECK(roots[0] == Approx(dense.values[n - 2]).margin(1e-8));
    CHECK(roots[1] == Approx(dense.values[n - 1]).margin(1e-8));
    // the roots sit near the limit locations rho_1.5 and rho_2
    const double band = 5.0 / std::sqrt(double(n));
    CHECK(std::abs(roots[0] - (1.5 + 1.0 / 1.5)) <= band);
    CHECK(std::abs(roots[1] - 2.5) <= band);
}

TEST_CASE("detroot window validation") {
    SecularSystem<double> sys;
    sys.eigs = {-1.0, 1.0};
    sys.thetas = {2.0};
    sys.weights = {{0.5, 0.5}};
    CHECK_THROWS_AS(solve_outliers_rank_r(sys, 0.5, 3.0), WindowTouchesSpectrum);
    CHECK_THROWS_AS(solve_outliers_rank_r(sys, 3.0, 2.0), ConfigError);
}

TEST_CASE("secular sign changes bracket every deformed outlier on rank-2 instances") {
    rng::Stream s(45);
    const int n = 40;
    auto X = random_symmetric(n, s, 1.0 / std::sqrt(double(n)));
    PerturbationSpec ps;
    ps.thetas = {1.6, 2.4};
    ps.model = SpikeModel::iid;
    ps.entry_law = EntryLaw(EntryLaw::Name::gaussian_real);
    auto spikes = sample_spikes<double>(n, ps, s);
    auto R = build_deformation(spikes, ps);
    auto ed = symmetric_eigh(X);
    auto sys = make_secular_system(ed, R);
    auto dense = deformed_spectrum_dense(X, R);
    // the two largest dense eigenvalues are outliers; f changes sign across each
    for (int k = 1; k <= 2; ++k) {
        const double root = dense.values[n - k];
        if (root <= ed.values.back()) continue; // not an outlier this draw
        const double lo = std::max(root - 1e-4, ed.values.back() + 1e-9);
        CHECK(secular_value(sys, lo) * secular_value(sys, root + 1e-4) < 0);
    }
}
