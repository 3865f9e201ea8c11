// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "spikesim/errors.hpp"

namespace spikesim::stats {

/// Finite real sample with a sorted cache. NaN and infinities are rejected
/// at construction.
class Sample {
  public:
    Sample() = default;
    explicit Sample(std::vector<double> v) : values_(std::move(v)) {
        for (double x : values_)
            if (!std::isfinite(x)) throw Error("Sample: non-finite entry");
        sorted_ = values_;
        std::sort(sorted_.begin(), sorted_.end());
    }

    std::size_t size() const { return values_.size(); }
    const std::vector<double>& values() const { return values_; }
    const std::vector<double>& sorted() const { return sorted_; }

  private:
    std::vector<double> values_;
    std::vector<double> sorted_;
};

inline double normal_cdf(double x, double mean = 0.0, double variance = 1.0) {
    if (!(variance > 0)) throw Error("normal_cdf: variance must be positive");
    return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * variance));
}

/// Inverse normal CDF: rational initializer refined by two Newton steps.
inline double normal_quantile(double p, double mean = 0.0, double variance = 1.0) {
    if (!(p > 0 && p < 1)) throw Error("normal_quantile: p must be in (0,1)");
    // Beasley-Springer-Moro style start
    const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                        1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
    const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                        6.680131188771972e+01, -1.328068155288572e+01};
    const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                        -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
    const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                        3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p > 1 - plow) {
        const double q = std::sqrt(-2 * std::log(1 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else {
        const double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    }
    for (int it = 0; it < 2; ++it) {
        const double e = normal_cdf(x) - p;
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2 * M_PI);
        x -= e / pdf;
    }
    return mean + x * std::sqrt(variance);
}

/// Tail probability Q(lambda) of the Kolmogorov distribution,
/// Q = 2 sum_k (-1)^{k-1} exp(-2 k^2 lambda^2), truncated at 100 terms.
/// The alternating series is useless below lambda ~ 0.2, where the dual
/// theta series for P(K <= lambda) converges instantly instead.
inline double kolmogorov_q(double lambda) {
    if (lambda <= 0) return 1.0;
    if (lambda < 0.2) {
        double cdf = 0;
        for (int k = 1; k <= 100; ++k) {
            const double t = (2 * k - 1) * M_PI / lambda;
            cdf += std::exp(-t * t / 8.0);
        }
        cdf *= std::sqrt(2 * M_PI) / lambda;
        return std::min(1.0, std::max(0.0, 1.0 - cdf));
    }
    double q = 0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        q += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-18) break;
    }
    return std::min(1.0, std::max(0.0, q));
}

struct KsResult {
    double d_statistic = 0;
    double p_value = std::numeric_limits<double>::quiet_NaN(); // NaN: suppressed
    double n_eff = 0;
};

/// One-sample Kolmogorov-Smirnov against a CDF. The p-value uses the
/// asymptotic series and is suppressed (NaN) below 10 samples.
inline KsResult ks_one_sample(const Sample& s, const std::function<double(double)>& cdf) {
    const auto& x = s.sorted();
    const std::size_t m = x.size();
    if (m == 0) throw TooFewSamples("ks_one_sample: empty sample");
    double d = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double F = cdf(x[i]);
        d = std::max(d, std::max(F - double(i) / m, double(i + 1) / m - F));
    }
    KsResult out;
    out.d_statistic = d;
    out.n_eff = double(m);
    if (m >= 10) out.p_value = kolmogorov_q(std::sqrt(double(m)) * d);
    return out;
}

/// Two-sample Kolmogorov-Smirnov over the pooled grid; ties are resolved by
/// evaluating both ECDFs from the right. n_eff = ab/(a+b).
inline KsResult ks_two_sample(const Sample& sa, const Sample& sb) {
    const auto& a = sa.sorted();
    const auto& b = sb.sorted();
    if (a.empty() || b.empty()) throw TooFewSamples("ks_two_sample: empty sample");
    double d = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        const double t = (j >= b.size() || (i < a.size() && a[i] <= b[j])) ? a[i] : b[j];
        while (i < a.size() && a[i] <= t) ++i;
        while (j < b.size() && b[j] <= t) ++j;
        d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
    }
    KsResult out;
    out.d_statistic = d;
    out.n_eff = double(a.size()) * double(b.size()) / double(a.size() + b.size());
    if (a.size() >= 10 && b.size() >= 10)
        out.p_value = kolmogorov_q(std::sqrt(out.n_eff) * d);
    return out;
}

struct MomentSummary {
    double mean = 0;
    double variance = 0; // unbiased
    double skewness = 0;
    double excess_kurtosis = 0;
    bool skewness_defined = false;
    bool kurtosis_defined = false;
};

inline MomentSummary moments(const Sample& s) {
    const auto& x = s.values();
    const std::size_t n = x.size();
    if (n < 2) throw TooFewSamples("moments: need at least 2 values");
    MomentSummary out;
    for (double v : x) out.mean += v;
    out.mean /= double(n);
    double m2 = 0, m3 = 0, m4 = 0;
    for (double v : x) {
        const double c = v - out.mean;
        m2 += c * c;
        m3 += c * c * c;
        m4 += c * c * c * c;
    }
    out.variance = m2 / double(n - 1);
    m2 /= double(n);
    m3 /= double(n);
    m4 /= double(n);
    if (m2 > 0) {
        out.skewness = m3 / std::pow(m2, 1.5);
        out.skewness_defined = true;
        if (n >= 4) {
            out.excess_kurtosis = m4 / (m2 * m2) - 3.0;
            out.kurtosis_defined = true;
        }
    }
    return out;
}

} // namespace spikesim::stats
