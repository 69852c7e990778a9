#pragma once

#include <stdexcept>
#include <string>

namespace mfclt {

/// Bad input: wrong dimension, out-of-range parameter, malformed config.
/// The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A configured size limit (Fock dimension, dense diagonalization) was hit.
class CapExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Too much probability mass fell outside the truncated Fock space.
class TruncationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Integrator or exponential propagator failed (NaN, non-convergence).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what)
{
    if (!ok) throw ValidationError(what);
}

} // namespace detail
} // namespace mfclt
