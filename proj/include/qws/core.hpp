// core.hpp: scalar types, lattice windows, phase arithmetic and the error type
// shared by every qws module.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

namespace qws {

using Complex = std::complex<double>;
using CoinMatrix = Eigen::Matrix2cd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr Complex kI{0.0, 1.0};

enum class ErrorKind {
    WindowTooSmall,
    WindowMismatch,
    EnvelopeViolation,
    UnsupportedParameter,
    ConvergenceFailure,
    AllZeroCoefficients,
    SchemaError,
    RangeError,
};

inline const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::WindowTooSmall: return "WindowTooSmall";
        case ErrorKind::WindowMismatch: return "WindowMismatch";
        case ErrorKind::EnvelopeViolation: return "EnvelopeViolation";
        case ErrorKind::UnsupportedParameter: return "UnsupportedParameter";
        case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
        case ErrorKind::AllZeroCoefficients: return "AllZeroCoefficients";
        case ErrorKind::SchemaError: return "SchemaError";
        case ErrorKind::RangeError: return "RangeError";
    }
    return "Unknown";
}

/// Error raised by every qws operation. `path` names the offending config
/// field for SchemaError / RangeError and is empty otherwise.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, std::string path = {})
        : std::runtime_error(std::string(to_string(kind)) + ": " + message),
          kind_(kind), path_(std::move(path)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& path() const noexcept { return path_; }

private:
    ErrorKind kind_;
    std::string path_;
};

// ------------------------------- phases -------------------------------------

/// Reduce an angle to [0, 2π).
inline double wrap_phase(double theta) noexcept {
    double r = std::fmod(theta, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r = 0.0;
    return r;
}

inline double phase_of(Complex z) noexcept { return wrap_phase(std::arg(z)); }

/// Distance between two angles measured along the circle, in [0, π].
inline double circular_distance(double a, double b) noexcept {
    const double d = wrap_phase(a - b);
    return d > kPi ? kTwoPi - d : d;
}

// ------------------------------- windows ------------------------------------

/// Inclusive range of lattice sites [lo, hi].
struct Window {
    long lo{0};
    long hi{1};

    Window() = default;
    Window(long lo_, long hi_) : lo(lo_), hi(hi_) {
        if (hi - lo + 1 < 2) {
            throw Error(ErrorKind::WindowTooSmall,
                        "window [" + std::to_string(lo) + ", " + std::to_string(hi) +
                            "] must hold at least two sites");
        }
    }

    /// Symmetric window [-L, L].
    static Window symmetric(long half_width) { return Window(-half_width, half_width); }

    long size() const noexcept { return hi - lo + 1; }
    bool contains(long x) const noexcept { return x >= lo && x <= hi; }
    bool contains(const Window& w) const noexcept { return w.lo >= lo && w.hi <= hi; }
    Window expanded(long by) const { return Window(lo - by, hi + by); }
    Window shifted(long by) const { return Window(lo + by, hi + by); }
    /// Basis index of (site, component) in the (x, component) lexicographic order.
    Eigen::Index index(long x, int comp) const noexcept {
        return static_cast<Eigen::Index>(2 * (x - lo) + comp);
    }

    friend bool operator==(const Window&, const Window&) = default;
};

/// Largest entry modulus of A* A − I.
inline double unitarity_defect(const CoinMatrix& m) {
    return (m.adjoint() * m - CoinMatrix::Identity()).cwiseAbs().maxCoeff();
}

}  // namespace qws
