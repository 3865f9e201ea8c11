// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

namespace spikesim::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// 64-bit finalizer (splitmix64). Bijective, passes BigCrush as a
/// counter-mode generator.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Purpose tags keep draws for different roles in one trial statistically
/// disjoint, so e.g. regenerating spikes never perturbs the matrix entries.
enum class Purpose : std::uint64_t {
    matrix_entries = 1,
    spike_entries = 2,
    spike_resample = 3,
    generic = 4,
};

/// Counter-based stream keyed by up to four 64-bit words. Output word k is
/// mix64(base + k*golden), so draws are a pure function of (key, counter)
/// and streams with distinct keys are independent for all practical
/// purposes. Cheap to construct; no warm-up needed.
class Stream {
  public:
    explicit Stream(std::uint64_t k0, std::uint64_t k1 = 0, std::uint64_t k2 = 0,
                    std::uint64_t k3 = 0) {
        std::uint64_t h = 0x243F6A8885A308D3ULL; // pi fraction, arbitrary nonzero
        for (std::uint64_t k : {k0, k1, k2, k3}) h = mix64(h ^ mix64(k + h));
        base_ = h;
    }

    std::uint64_t next_u64() { return mix64(base_ + (++counter_) * kGolden); }

    /// Uniform on [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on (lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Marsaglia polar (rejection; no libm trig).
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    /// Standard complex normal: E|z|^2 = 1, independent real/imaginary parts.
    std::complex<double> gaussian_complex() {
        const double s = 1.0 / std::sqrt(2.0);
        return {s * gaussian(), s * gaussian()};
    }

    double rademacher() { return (next_u64() & 1u) ? 1.0 : -1.0; }

    std::uint64_t counter() const { return counter_; }

  private:
    std::uint64_t base_ = 0;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Stream for one (master_seed, n, trial, purpose) cell of an experiment.
inline Stream trial_stream(std::uint64_t master_seed, std::uint64_t n, std::uint64_t trial,
                           Purpose purpose) {
    return Stream(master_seed, n, trial, static_cast<std::uint64_t>(purpose));
}

} // namespace spikesim::rng
