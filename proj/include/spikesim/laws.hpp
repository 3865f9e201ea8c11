// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <type_traits>

#include "spikesim/errors.hpp"
#include "spikesim/rng.hpp"

namespace spikesim {

enum class Field { real, complex };

/// Centred, variance-one entry distributions for matrix and spike entries.
/// The fourth cumulant is E[x^4]-3 in the real case and E[|z|^4]-2 in the
/// complex case; it is the only feature of the law (beyond the field) that
/// enters the limit predictions.
class EntryLaw {
  public:
    enum class Name { gaussian_real, gaussian_complex, rademacher, uniform_sym };

    EntryLaw() = default;
    explicit EntryLaw(Name n) : name_(n) {}

    Name name() const { return name_; }
    Field field() const { return name_ == Name::gaussian_complex ? Field::complex : Field::real; }

    double kappa4() const {
        switch (name_) {
            case Name::gaussian_real: return 0.0;
            case Name::gaussian_complex: return 0.0;
            case Name::rademacher: return -2.0; // x^4 == 1
            case Name::uniform_sym: return 9.0 / 5.0 - 3.0; // moment of U[-sqrt3, sqrt3]
        }
        return 0.0;
    }

    /// Real version of the family, used for diagonal entries of Hermitian
    /// samples (complex gaussian maps to real gaussian).
    EntryLaw real_version() const {
        return name_ == Name::gaussian_complex ? EntryLaw(Name::gaussian_real) : *this;
    }

    double sample_real(rng::Stream& s) const {
        switch (name_) {
            case Name::gaussian_real: return s.gaussian();
            case Name::gaussian_complex:
                throw Error("EntryLaw: complex law has no real sampler");
            case Name::rademacher: return s.rademacher();
            case Name::uniform_sym: {
                const double h = std::sqrt(3.0);
                return s.uniform(-h, h);
            }
        }
        return 0.0;
    }

    std::complex<double> sample_complex(rng::Stream& s) const {
        if (name_ == Name::gaussian_complex) return s.gaussian_complex();
        return {sample_real(s), 0.0};
    }

    std::string str() const {
        switch (name_) {
            case Name::gaussian_real: return "gaussian_real";
            case Name::gaussian_complex: return "gaussian_complex";
            case Name::rademacher: return "rademacher";
            case Name::uniform_sym: return "uniform_sym";
        }
        return "?";
    }

    static EntryLaw parse(const std::string& s) {
        if (s == "gaussian_real") return EntryLaw(Name::gaussian_real);
        if (s == "gaussian_complex") return EntryLaw(Name::gaussian_complex);
        if (s == "rademacher") return EntryLaw(Name::rademacher);
        if (s == "uniform_sym") return EntryLaw(Name::uniform_sym);
        throw ConfigError("unknown entry law '" + s + "'");
    }

  private:
    Name name_ = Name::gaussian_real;
};

namespace detail {
template <class S> S sample_entry(const EntryLaw& law, rng::Stream& s) {
    if constexpr (std::is_same_v<S, std::complex<double>>)
        return law.sample_complex(s);
    else
        return law.sample_real(s);
}
} // namespace detail

} // namespace spikesim
