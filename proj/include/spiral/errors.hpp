#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace spiral {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Index or argument outside the supported range (e.g. Laguerre degree > 200).
class RangeError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration: bad physical parameters, malformed pump spec, ...
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Mathematical domain violation (branch point, empty state, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Requested evaluation route does not exist for these inputs.
class UnsupportedMethodError : public Error {
public:
    using Error::Error;
};

/// Quadrature refinement did not reach the requested tolerance.
/// Carries the last estimate so callers can still report it.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::complex<double> last_estimate, double last_change)
        : Error(what), last_estimate_(last_estimate), last_change_(last_change) {}

    std::complex<double> last_estimate() const noexcept { return last_estimate_; }
    double last_change() const noexcept { return last_change_; }

private:
    std::complex<double> last_estimate_;
    double last_change_;
};

/// A truncated spectrum cannot certify the requested coverage.
class TruncationError : public Error {
public:
    TruncationError(const std::string& what, double achieved_fraction)
        : Error(what), achieved_fraction_(achieved_fraction) {}

    double achieved_fraction() const noexcept { return achieved_fraction_; }

private:
    double achieved_fraction_;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace spiral
