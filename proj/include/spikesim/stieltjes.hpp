// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "spikesim/errors.hpp"
#include "spikesim/linalg.hpp"
#include "spikesim/matrix.hpp"

namespace spikesim {

enum class SpikeModel { iid, orthonormalised };

namespace detail {

/// 64-point Gauss-Legendre rule on [0,1], built once by Newton iteration on
/// the Legendre recurrence.
struct GaussLegendre64 {
    std::array<double, 64> x{}, w{};
    GaussLegendre64() {
        const int n = 64;
        for (int i = 0; i < n / 2; ++i) {
            double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            double p0 = 0, p1 = 0;
            for (int it = 0; it < 100; ++it) {
                p0 = 1.0;
                p1 = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j + 1.0) * t * p1 - j * p2) / (j + 1.0);
                }
                const double dp = n * (t * p0 - p1) / (t * t - 1.0);
                const double dt = p0 / dp;
                t -= dt;
                if (std::abs(dt) < 1e-15) break;
            }
            p0 = 1.0;
            p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * t * p1 - j * p2) / (j + 1.0);
            }
            const double dp = n * (t * p0 - p1) / (t * t - 1.0);
            const double weight = 2.0 / ((1.0 - t * t) * dp * dp);
            x[i] = 0.5 * (1.0 - t);
            x[n - 1 - i] = 0.5 * (1.0 + t);
            w[i] = 0.5 * weight;
            w[n - 1 - i] = 0.5 * weight;
        }
    }
};

inline const GaussLegendre64& gl64() {
    static const GaussLegendre64 rule;
    return rule;
}

} // namespace detail

/// Limiting spectral law with edges [a,b], density/CDF, and closed-form
/// Stieltjes transform G(z) = int d mu(x) / (z - x) off the support.
/// custom_table treats a sorted value table as an n-atom measure, so users
/// can feed measured spectra; its transform is the exact finite sum.
class LimitLaw {
  public:
    enum class Kind { semicircle, marchenko_pastur, uniform, custom_table };

    static LimitLaw semicircle(double sigma) {
        if (!(sigma > 0)) throw ConfigError("semicircle: sigma must be positive");
        LimitLaw l;
        l.kind_ = Kind::semicircle;
        l.sigma_ = sigma;
        l.a_ = -2 * sigma;
        l.b_ = 2 * sigma;
        return l;
    }

    static LimitLaw marchenko_pastur(double c) {
        if (!(c > 0 && c < 1)) throw ConfigError("marchenko_pastur: need 0 < c < 1");
        LimitLaw l;
        l.kind_ = Kind::marchenko_pastur;
        l.c_ = c;
        l.a_ = (1 - std::sqrt(c)) * (1 - std::sqrt(c));
        l.b_ = (1 + std::sqrt(c)) * (1 + std::sqrt(c));
        return l;
    }

    static LimitLaw uniform(double lo, double hi) {
        if (!(lo < hi)) throw ConfigError("uniform: need lo < hi");
        LimitLaw l;
        l.kind_ = Kind::uniform;
        l.a_ = lo;
        l.b_ = hi;
        return l;
    }

    static LimitLaw custom_table(std::vector<double> atoms) {
        if (atoms.empty()) throw ConfigError("custom_table: empty table");
        std::sort(atoms.begin(), atoms.end());
        LimitLaw l;
        l.kind_ = Kind::custom_table;
        l.a_ = atoms.front();
        l.b_ = atoms.back();
        l.atoms_ = std::move(atoms);
        return l;
    }

    Kind kind() const { return kind_; }
    double a() const { return a_; }
    double b() const { return b_; }
    double sigma() const { return sigma_; }
    double ratio() const { return c_; }
    const std::vector<double>& atoms() const { return atoms_; }

    double pdf(double x) const {
        switch (kind_) {
            case Kind::semicircle: {
                const double d = 4 * sigma_ * sigma_ - x * x;
                return d <= 0 ? 0.0 : std::sqrt(d) / (2 * M_PI * sigma_ * sigma_);
            }
            case Kind::marchenko_pastur: {
                if (x <= a_ || x >= b_) return 0.0;
                return std::sqrt((b_ - x) * (x - a_)) / (2 * M_PI * c_ * x);
            }
            case Kind::uniform:
                return (x <= a_ || x >= b_) ? 0.0 : 1.0 / (b_ - a_);
            case Kind::custom_table:
                throw Error("custom_table is atomic; no density");
        }
        return 0.0;
    }

    double cdf(double x) const {
        switch (kind_) {
            case Kind::semicircle: {
                if (x <= a_) return 0.0;
                if (x >= b_) return 1.0;
                const double s2 = sigma_ * sigma_;
                return 0.5 + x * std::sqrt(4 * s2 - x * x) / (4 * M_PI * s2) +
                       std::asin(x / (2 * sigma_)) / M_PI;
            }
            case Kind::marchenko_pastur: {
                if (x <= a_) return 0.0;
                if (x >= b_) return 1.0;
                // substitution x(t) = a + (b-a) sin^2 t makes the integrand smooth
                const double T = std::asin(std::sqrt((x - a_) / (b_ - a_)));
                const auto& gl = detail::gl64();
                double acc = 0;
                for (int i = 0; i < 64; ++i) {
                    const double t = T * gl.x[i];
                    const double st = std::sin(t), ct = std::cos(t);
                    const double xt = a_ + (b_ - a_) * st * st;
                    acc += gl.w[i] * (b_ - a_) * (b_ - a_) * 2 * st * st * ct * ct / xt;
                }
                return acc * T / (2 * M_PI * c_);
            }
            case Kind::uniform:
                return std::clamp((x - a_) / (b_ - a_), 0.0, 1.0);
            case Kind::custom_table: {
                const auto it = std::upper_bound(atoms_.begin(), atoms_.end(), x);
                return double(it - atoms_.begin()) / double(atoms_.size());
            }
        }
        return 0.0;
    }

    /// Inverse CDF by bisection to 1e-12 absolute on the support.
    double quantile(double p) const {
        if (!(p >= 0 && p <= 1)) throw QuantileFailure("quantile: p outside [0,1]");
        if (kind_ == Kind::uniform) return a_ + (b_ - a_) * p;
        if (kind_ == Kind::custom_table) {
            const std::size_t n = atoms_.size();
            const std::size_t k = std::min<std::size_t>(
                n - 1, std::size_t(std::max(0.0, std::ceil(p * double(n)) - 1)));
            return atoms_[k];
        }
        double lo = a_, hi = b_;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (cdf(mid) < p)
                lo = mid;
            else
                hi = mid;
            if (hi - lo < 1e-12) return 0.5 * (lo + hi);
        }
        throw QuantileFailure("quantile: bisection did not converge");
    }

    /// G(z) for real z outside [a,b]; positive for z > b, negative for z < a.
    double stieltjes(double z) const {
        if (z >= a_ && z <= b_ && kind_ != Kind::custom_table)
            throw InsideSupport("stieltjes: z inside the support");
        switch (kind_) {
            case Kind::semicircle: {
                const double s2 = sigma_ * sigma_;
                const double root = std::sqrt(z * z - 4 * s2);
                // conjugate form, stable for large |z|
                return 2.0 / (z + (z > 0 ? root : -root));
            }
            case Kind::marchenko_pastur: {
                const double d = (z - c_ - 1) * (z - c_ - 1) - 4 * c_;
                const double root = std::sqrt(d);
                return 2.0 / (z + c_ - 1 + (z > b_ ? root : -root));
            }
            case Kind::uniform:
                return std::log((z - a_) / (z - b_)) / (b_ - a_);
            case Kind::custom_table: {
                double acc = 0;
                for (double x : atoms_) {
                    const double d = z - x;
                    if (std::abs(d) < 1e-14 * (1 + std::abs(z)))
                        throw PoleHit("stieltjes: z hits a table atom");
                    acc += 1.0 / d;
                }
                return acc / double(atoms_.size());
            }
        }
        return 0.0;
    }

    /// G'(z) for real z strictly outside [a,b]; always negative.
    double stieltjes_prime(double z) const {
        if (z >= a_ && z <= b_ && kind_ != Kind::custom_table)
            throw InsideSupport("stieltjes_prime: z inside the support");
        switch (kind_) {
            case Kind::semicircle: {
                const double s2 = sigma_ * sigma_;
                const double root = std::sqrt(z * z - 4 * s2);
                const double u = z + (z > 0 ? root : -root);
                const double du = 1 + (z > 0 ? z / root : -z / root);
                return -2.0 * du / (u * u);
            }
            case Kind::marchenko_pastur: {
                const double d = (z - c_ - 1) * (z - c_ - 1) - 4 * c_;
                const double root = std::sqrt(d);
                const double sgn = z > b_ ? 1.0 : -1.0;
                const double u = z + c_ - 1 + sgn * root;
                const double du = 1 + sgn * (z - c_ - 1) / root;
                return -2.0 * du / (u * u);
            }
            case Kind::uniform:
                return (1.0 / (z - a_) - 1.0 / (z - b_)) / (b_ - a_);
            case Kind::custom_table: {
                double acc = 0;
                for (double x : atoms_) {
                    const double d = z - x;
                    if (std::abs(d) < 1e-14 * (1 + std::abs(z)))
                        throw PoleHit("stieltjes_prime: z hits a table atom");
                    acc += 1.0 / (d * d);
                }
                return -acc / double(atoms_.size());
            }
        }
        return 0.0;
    }

    /// One-sided limits of 1/G at the edges. Atomic tables have G diverging
    /// at both edges, hence zero thresholds: every nonzero spike deviates.
    double theta_high() const {
        switch (kind_) {
            case Kind::semicircle: return sigma_;
            case Kind::marchenko_pastur: return c_ + std::sqrt(c_);
            case Kind::uniform: return 0.0; // G diverges logarithmically at the edges
            case Kind::custom_table: return 0.0;
        }
        return 0.0;
    }
    double theta_low() const {
        switch (kind_) {
            case Kind::semicircle: return -sigma_;
            case Kind::marchenko_pastur: return c_ - std::sqrt(c_);
            case Kind::uniform: return 0.0;
            case Kind::custom_table: return 0.0;
        }
        return 0.0;
    }

  private:
    Kind kind_ = Kind::semicircle;
    double sigma_ = 1.0; // semicircle scale
    double c_ = 0.5;     // marchenko-pastur ratio
    double a_ = -2, b_ = 2;
    std::vector<double> atoms_;
};

/// Empirical transform (1/n) sum 1/(z - lambda_i).
inline double stieltjes_empirical(const SpectrumVector& spec, double z) {
    double acc = 0;
    for (double l : spec.values) {
        const double d = z - l;
        if (std::abs(d) < 1e-14 * (1 + std::abs(z)))
            throw PoleHit("stieltjes_empirical: z hits an eigenvalue");
        acc += 1.0 / d;
    }
    return acc / double(spec.n());
}

inline std::pair<double, double> thresholds(const LimitLaw& law) {
    return {law.theta_low(), law.theta_high()};
}

struct RhoResult {
    double value = 0;
    bool deviates = false; // strictly outside [theta_low, theta_high]
    bool critical = false; // within 1e-9 of a threshold
};

/// Almost-sure outlier location: the unique solution of G(z) = 1/theta off
/// the support when theta deviates, and the corresponding support edge
/// otherwise. Bracketed bisection with doubling expansion; G is monotone on
/// each side so no derivative is needed.
inline RhoResult rho(const LimitLaw& law, double theta) {
    if (theta == 0) throw ConfigError("rho: theta must be nonzero");
    RhoResult out;
    const double th = law.theta_high(), tl = law.theta_low();
    out.critical = std::abs(theta - th) < 1e-9 || std::abs(theta - tl) < 1e-9;
    if (theta > 0 && theta <= th) {
        out.value = law.b();
        return out;
    }
    if (theta < 0 && theta >= tl) {
        out.value = law.a();
        return out;
    }
    out.deviates = true;
    const double target = 1.0 / theta;
    const double scale = std::max(1.0, std::max(std::abs(law.a()), std::abs(law.b())));
    if (theta > 0) {
        double lo = law.b();
        double delta = 1e-3 * scale;
        double hi = lo + delta;
        while (law.stieltjes(hi) > target) {
            delta *= 2;
            hi = lo + delta;
            if (delta > 1e12 * scale) throw Error("rho: bracket expansion failed");
        }
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (law.stieltjes(mid) >= target)
                lo = mid;
            else
                hi = mid;
        }
        out.value = 0.5 * (lo + hi);
    } else {
        double hi = law.a();
        double delta = 1e-3 * scale;
        double lo = hi - delta;
        while (law.stieltjes(lo) < target) {
            delta *= 2;
            lo = hi - delta;
            if (delta > 1e12 * scale) throw Error("rho: bracket expansion failed");
        }
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (law.stieltjes(mid) >= target)
                lo = mid;
            else
                hi = mid;
        }
        out.value = 0.5 * (lo + hi);
    }
    return out;
}

/// Standard deviation scale of sqrt(n) * (deformed eigenvalue - rho_alpha)
/// for a deviating spike alpha. In the i.i.d. model c^2 = -1/G'(rho); in the
/// orthonormalised model c^2 = (-G'(rho) - 1/alpha^2) / G'(rho)^2.
inline double fluctuation_scale(const LimitLaw& law, double alpha, SpikeModel model) {
    const RhoResult r = rho(law, alpha);
    if (!r.deviates) throw NotDeviating("fluctuation_scale: alpha does not deviate");
    const double gp = law.stieltjes_prime(r.value);
    double c2 = 0;
    if (model == SpikeModel::iid) {
        c2 = -1.0 / gp;
    } else {
        c2 = (-gp - 1.0 / (alpha * alpha)) / (gp * gp);
    }
    return std::sqrt(std::max(0.0, c2));
}

/// Addend to the limiting variance of gamma = sqrt(n)(deformed - rho) caused
/// by a nonzero fourth cumulant. The quadratic-form CLT puts kappa4 * l into
/// the variance of the diagonal resolvent statistic; dividing by G'(rho)^2
/// maps it to the eigenvalue scale, so the addend is kappa4 * l / G'^2.
/// (Sanity anchor: for X = 0 and a rank-one i.i.d. spike the deformed top
/// eigenvalue is theta * |g|^2 / n, whose variance is theta^2 (2 + kappa4)
/// exactly; only this normalization reproduces it.)
inline double kappa4_correction(double l_value, double kappa4, double g_prime) {
    if (!(g_prime < 0)) throw Error("kappa4_correction: G' must be negative off-support");
    return kappa4 * l_value / (g_prime * g_prime);
}

/// Diagonal resolvent statistic l(z) for a diagonal realization of a
/// spectrum: R_ii = 1/(z - lambda_i).
inline double diag_resolvent_stat(const SpectrumVector& spec, double z, SpikeModel model) {
    const int n = spec.n();
    double mean = 0;
    for (double l : spec.values) {
        const double d = z - l;
        if (std::abs(d) < 1e-14 * (1 + std::abs(z)))
            throw PoleHit("diag_resolvent_stat: z hits an eigenvalue");
        mean += 1.0 / d;
    }
    mean /= n;
    double acc = 0;
    for (double l : spec.values) {
        const double r = 1.0 / (z - l);
        const double t = model == SpikeModel::iid ? r : r - mean;
        acc += t * t;
    }
    return acc / n;
}

/// Same statistic for a dense self-adjoint matrix, via one eigendecomposition:
/// R_ii = sum_k |Q_ik|^2 / (z - lambda_k).
template <class S>
double diag_resolvent_stat(const SymmetricMatrix<S>& X, double z, SpikeModel model) {
    const auto ed = symmetric_eigh(X);
    const int n = X.n();
    for (double l : ed.values)
        if (std::abs(z - l) < 1e-14 * (1 + std::abs(z)))
            throw PoleHit("diag_resolvent_stat: z hits an eigenvalue");
    std::vector<double> rdiag(n, 0.0);
    for (int k = 0; k < n; ++k) {
        const S* q = ed.vectors.col(k);
        const double inv = 1.0 / (z - ed.values[k]);
        for (int i = 0; i < n; ++i) rdiag[i] += scalar_traits<S>::abs2(q[i]) * inv;
    }
    double mean = 0;
    for (double r : rdiag) mean += r;
    mean /= n;
    double acc = 0;
    for (double r : rdiag) {
        const double t = model == SpikeModel::iid ? r : r - mean;
        acc += t * t;
    }
    return acc / n;
}

} // namespace spikesim
