// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace spikesim {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Eigensolver iteration failed to converge (pathological input).
struct NonConvergence : Error {
    using Error::Error;
};

/// Gram family numerically degenerate; caller must resample.
struct DegenerateFamily : Error {
    using Error::Error;
};

/// Evaluation point collided with a spectral pole.
struct PoleHit : Error {
    using Error::Error;
};

/// Stieltjes transform requested inside the support of the limit law.
struct InsideSupport : Error {
    using Error::Error;
};

/// Fluctuation scale requested for a non-deviating spike.
struct NotDeviating : Error {
    using Error::Error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

/// Rank-one secular bracketing failed; indicates a weight/multiplicity bug.
struct BracketFailure : Error {
    using Error::Error;
};

/// Root search window overlaps the spectrum of the unperturbed matrix.
struct WindowTouchesSpectrum : Error {
    using Error::Error;
};

/// Records do not track enough extreme indices for the requested analysis.
struct InsufficientTracking : Error {
    using Error::Error;
};

struct TooFewSamples : Error {
    using Error::Error;
};

/// CDF inversion did not converge.
struct QuantileFailure : Error {
    using Error::Error;
};

/// Invalid or malformed configuration; message carries a JSON pointer.
struct ConfigError : Error {
    using Error::Error;
};

} // namespace spikesim
