// symbol.hpp: Fourier symbol of the bulk walk, its dispersion determinant,
// essential-spectrum arcs, thresholds, level sets and plane-wave quasi-modes.
//
// With ψ̂(ξ) = Σ_x e^{−ixξ} ψ(x), the bulk walk U₀ = S C₀ acts as multiplication by
//     Û₀(ξ) = [[a₀ e^{iξ}, b₀ e^{iξ}], [c₀ e^{−iξ}, d₀ e^{−iξ}]],
// and det(Û₀(ξ) − λ) = λ² − 2λ p e^{iγ/2} cos(ξ + α − γ/2) + e^{iγ}.

#pragma once

#include "qws/core.hpp"
#include "qws/lattice.hpp"

#include <algorithm>
#include <array>
#include <vector>

namespace qws {

inline CoinMatrix symbol_matrix(double xi, const ModelParams& m) {
    CoinMatrix s = make_coin_c0(m);
    const Complex fwd = std::polar(1.0, xi);
    s.row(0) *= fwd;
    s.row(1) *= std::conj(fwd);
    return s;
}

/// p(ξ, θ) = det(Û₀(ξ) − e^{iθ})
inline Complex dispersion(double xi, double theta, const ModelParams& m) {
    const Complex lambda = std::polar(1.0, theta);
    return lambda * lambda -
           2.0 * lambda * m.p * std::polar(1.0, m.gamma / 2.0) * std::cos(xi + m.alpha - m.gamma / 2.0) +
           std::polar(1.0, m.gamma);
}

/// ∂_ξ p(ξ, θ)
inline Complex dispersion_derivative(double xi, double theta, const ModelParams& m) {
    return 2.0 * m.p * std::polar(1.0, m.gamma / 2.0 + theta) * std::sin(xi + m.alpha - m.gamma / 2.0);
}

/// Both eigenvalues of a 2×2 matrix, ordered by phase.
inline std::array<Complex, 2> eigenvalues_2x2(const CoinMatrix& a) {
    const Complex tr = a.trace();
    const Complex det = a.determinant();
    const Complex disc = std::sqrt(tr * tr - 4.0 * det);
    // larger-modulus root first, the other from the product to avoid cancellation
    Complex l1 = std::abs(tr + disc) >= std::abs(tr - disc) ? (tr + disc) / 2.0 : (tr - disc) / 2.0;
    Complex l2 = std::abs(l1) > 0.0 ? det / l1 : (tr - l1);
    if (phase_of(l2) < phase_of(l1)) std::swap(l1, l2);
    return {l1, l2};
}

/// Unit eigenvector of a 2×2 matrix for `lambda`. Phase fixed so the first
/// component is real and nonnegative (the second one when the first vanishes).
inline Eigen::Vector2cd eigenvector_2x2(const CoinMatrix& a, Complex lambda) {
    Eigen::Vector2cd u(a(0, 1), lambda - a(0, 0));
    Eigen::Vector2cd w(lambda - a(1, 1), a(1, 0));
    Eigen::Vector2cd v = u.norm() >= w.norm() ? u : w;
    if (v.norm() == 0.0) v = Eigen::Vector2cd(1.0, 0.0);  // scalar matrix
    v.normalize();
    const Complex pivot = std::abs(v[0]) > 1e-12 ? v[0] : v[1];
    return v * (std::conj(pivot) / std::abs(pivot));
}

// ----------------------------- band structure -------------------------------

/// Closed arc of the phase circle from `lo` counter-clockwise to `hi`
/// (both in [0, 2π); hi < lo means the arc wraps through 0).
struct Arc {
    double lo{0.0};
    double hi{0.0};

    double length() const noexcept {
        const double d = wrap_phase(hi - lo);
        return d == 0.0 ? kTwoPi : d;
    }

    /// θ lies on the arc, with `margin` > 0 shrinking and < 0 growing it.
    bool contains(double theta, double margin = 0.0) const noexcept {
        const double offset = wrap_phase(theta - lo);
        const double len = length();
        if (margin >= 0.0) return offset >= margin && offset <= len - margin;
        return offset <= len - margin || offset >= kTwoPi + margin;
    }
};

struct BandStructure {
    std::array<Arc, 2> arcs{};
    std::vector<double> thresholds;          // sorted, distinct
    std::vector<int> threshold_multiplicity;  // 1 each for p < 1, 2 each for p = 1
    bool degenerate{false};                   // p = 1: the arcs cover the whole circle

    /// On σ_ess, within `tol` of an arc.
    bool in_band(double theta, double tol = 0.0) const {
        if (degenerate) return true;
        return arcs[0].contains(theta, -tol) || arcs[1].contains(theta, -tol);
    }

    double distance_to_threshold(double theta) const {
        double best = kPi;
        for (double t : thresholds) best = std::min(best, circular_distance(theta, t));
        return best;
    }

    /// Inside an arc and at least `radius` away from every threshold.
    bool in_interior(double theta, double radius) const {
        return in_band(theta) && distance_to_threshold(theta) > radius;
    }
};

namespace detail {
inline void require_positive_p(const ModelParams& m) {
    if (m.p <= 0.0) {
        throw Error(ErrorKind::UnsupportedParameter,
                    "p = 0: the bulk spectrum is two points and carries no band");
    }
}
}  // namespace detail

/// Essential-spectrum arcs
///   [arccos p + γ/2, π − arccos p + γ/2] and its translate by π.
inline BandStructure essential_band(const ModelParams& m) {
    detail::require_positive_p(m);
    const double a = std::acos(m.p);
    const double g = m.gamma / 2.0;
    BandStructure b;
    b.arcs[0] = Arc{wrap_phase(a + g), wrap_phase(kPi - a + g)};
    b.arcs[1] = Arc{wrap_phase(kPi + a + g), wrap_phase(kTwoPi - a + g)};
    if (m.p >= 1.0) {
        b.degenerate = true;
        b.arcs[0] = Arc{wrap_phase(g), wrap_phase(kPi + g)};
        b.arcs[1] = Arc{wrap_phase(kPi + g), wrap_phase(g)};
        b.thresholds = {b.arcs[0].lo, b.arcs[1].lo};
        b.threshold_multiplicity = {2, 2};
    } else {
        b.thresholds = {b.arcs[0].lo, b.arcs[0].hi, b.arcs[1].lo, b.arcs[1].hi};
        b.threshold_multiplicity = {1, 1, 1, 1};
    }
    std::vector<std::size_t> order(b.thresholds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return b.thresholds[i] < b.thresholds[j]; });
    std::vector<double> t;
    std::vector<int> mult;
    for (auto i : order) {
        t.push_back(b.thresholds[i]);
        mult.push_back(b.threshold_multiplicity[i]);
    }
    b.thresholds = std::move(t);
    b.threshold_multiplicity = std::move(mult);
    return b;
}

/// Threshold phases, computed as arguments of e^{iγ/2}(±p ± i sqrt(1 − p²)).
/// Coincident phases (p = 1) are listed once.
inline std::vector<double> thresholds(const ModelParams& m) {
    detail::require_positive_p(m);
    const Complex g = std::polar(1.0, m.gamma / 2.0);
    std::vector<double> out;
    for (Complex z : {Complex(m.p, m.q), Complex(-m.p, m.q), Complex(-m.p, -m.q), Complex(m.p, -m.q)}) {
        out.push_back(phase_of(g * z));
    }
    std::sort(out.begin(), out.end());
    std::vector<double> unique;
    for (double t : out) {
        if (unique.empty() || circular_distance(unique.back(), t) > 1e-12) unique.push_back(t);
    }
    if (unique.size() > 1 && circular_distance(unique.front(), unique.back()) <= 1e-12) unique.pop_back();
    return unique;
}

// ------------------------------- level sets ---------------------------------

enum class LevelKind { regular, singular };

struct FermiPoint {
    double xi{0.0};
    LevelKind kind{LevelKind::regular};
};

/// M(θ) = {ξ : p(ξ, θ) = 0} with each point tagged regular (∂_ξ p ≠ 0) or singular.
struct FermiSet {
    double theta{0.0};
    std::vector<FermiPoint> points;

    std::size_t count(LevelKind k) const {
        return static_cast<std::size_t>(std::count_if(points.begin(), points.end(),
                                                       [k](const FermiPoint& p) { return p.kind == k; }));
    }
};

inline constexpr double kThresholdTolerance = 1e-12;

/// Solves cos(ξ + α − γ/2) = cos(θ − γ/2) / p.
inline FermiSet fermi_set(double theta, const ModelParams& m) {
    detail::require_positive_p(m);
    FermiSet fs;
    fs.theta = wrap_phase(theta);
    const double c = std::cos(theta - m.gamma / 2.0);
    const double shift = m.gamma / 2.0 - m.alpha;
    const double excess = std::abs(c) - m.p;

    auto tag = [&](double xi) {
        xi = wrap_phase(xi);
        const bool regular = std::abs(dispersion_derivative(xi, theta, m)) > 1e-10;
        fs.points.push_back({xi, regular ? LevelKind::regular : LevelKind::singular});
    };

    if (excess > kThresholdTolerance) return fs;  // spectral gap
    if (std::abs(excess) <= kThresholdTolerance) {
        tag((c > 0.0 ? 0.0 : kPi) + shift);
        return fs;
    }
    const double u = std::acos(std::clamp(c / m.p, -1.0, 1.0));
    tag(u + shift);
    tag(-u + shift);
    std::sort(fs.points.begin(), fs.points.end(),
              [](const FermiPoint& a, const FermiPoint& b) { return a.xi < b.xi; });
    return fs;
}

// ------------------------------- quasi-modes --------------------------------

struct QuasiMode {
    State state;
    double theta{0.0};
    double residual{0.0};
};

/// Plane wave e^{ixξ} v(ξ) cut off sharply to sites 0..width−1 and normalized,
/// where v(ξ) is the eigenvector of Û₀(ξ) for eigenvalue number `branch`
/// (ordered by phase). `residual` is ‖(U₀ − e^{iθ})ψ‖, measured on Z for
/// padded boundaries and on the ring for periodic ones.
inline QuasiMode quasi_mode(double xi, long width, const ModelParams& m, int branch = 0,
                            Boundary boundary = Boundary::padded) {
    if (width < 8) throw Error(ErrorKind::RangeError, "quasi-mode width must be >= 8", "width");
    const CoinMatrix sym = symbol_matrix(xi, m);
    const Complex lambda = eigenvalues_2x2(sym)[branch == 0 ? 0 : 1];
    const Eigen::Vector2cd v = eigenvector_2x2(sym, lambda);

    const Window w(0, width - 1);
    State psi = State::zero(w);
    const double norm = 1.0 / std::sqrt(static_cast<double>(width));
    for (long x = w.lo; x <= w.hi; ++x) {
        const Complex phase = std::polar(norm, static_cast<double>(x) * xi);
        psi(x, 0) = phase * v[0];
        psi(x, 1) = phase * v[1];
    }

    const CoinMatrix c0 = make_coin_c0(m);
    double residual = 0.0;
    if (boundary == Boundary::periodic) {
        const State out = step(psi, CoinField::constant(w, c0), Boundary::periodic);
        residual = (out.amp - lambda * psi.amp).norm();
    } else {
        const State out = step(psi, CoinField::constant(w, c0), Boundary::padded);
        residual = (out.amp - lambda * psi.embedded(out.window).amp).norm();
    }
    return QuasiMode{std::move(psi), phase_of(lambda), residual};
}

}  // namespace qws
