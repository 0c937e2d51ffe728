// lattice.hpp: coins, coin fields and two-component states on a finite window,
// and the exact time step U = S C.
//
// Convention: (S ψ)(x) = [ψ⁰(x+1), ψ¹(x−1)], so after the coin acts, component 0
// hops one site to the left and component 1 one site to the right.

#pragma once

#include "qws/core.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace qws {

// ----------------------------- parameters -----------------------------------

/// Bulk coin parameters. q = +sqrt(1 − p²); phases are kept in [0, 2π).
struct ModelParams {
    double p{1.0 / std::numbers::sqrt2};
    double q{1.0 / std::numbers::sqrt2};
    double alpha{0.0};
    double beta{0.0};
    double gamma{0.0};

    static ModelParams make(double p, double alpha = 0.0, double beta = 0.0, double gamma = 0.0) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw Error(ErrorKind::RangeError, "p must lie in [0, 1], got " + std::to_string(p),
                        "model.p");
        }
        for (double ph : {alpha, beta, gamma}) {
            if (!std::isfinite(ph)) throw Error(ErrorKind::RangeError, "non-finite phase", "model");
        }
        ModelParams m;
        m.p = p;
        m.q = std::sqrt(std::max(0.0, 1.0 - p * p));
        m.alpha = wrap_phase(alpha);
        m.beta = wrap_phase(beta);
        m.gamma = wrap_phase(gamma);
        return m;
    }

    /// p = 1/√2 with all phases zero: the real orthogonal coin [[1, 1], [−1, 1]]/√2.
    static ModelParams hadamard() { return make(1.0 / std::numbers::sqrt2); }
};

/// Bulk coin C₀ in the (p, α, β, γ) parametrization.
inline CoinMatrix make_coin_c0(const ModelParams& m) {
    const Complex g = std::polar(1.0, m.gamma / 2.0);
    const double half = m.gamma / 2.0;
    CoinMatrix c;
    c(0, 0) = m.p * std::polar(1.0, m.alpha - half);
    c(0, 1) = m.q * std::polar(1.0, m.beta - half);
    c(1, 0) = -m.q * std::polar(1.0, -(m.beta - half));
    c(1, 1) = m.p * std::polar(1.0, -(m.alpha - half));
    return g * c;
}

/// Anti-diagonal (perfectly reflecting) coin placed on edge defects.
inline CoinMatrix make_defect_coin(double beta_prime, double gamma_prime) {
    const double shift = beta_prime - gamma_prime / 2.0;
    CoinMatrix c;
    c(0, 0) = 0.0;
    c(0, 1) = std::polar(1.0, shift);
    c(1, 0) = -std::polar(1.0, -shift);
    c(1, 1) = 0.0;
    return std::polar(1.0, gamma_prime / 2.0) * c;
}

/// Edge defects e_y = {y − 1, y} for every listed center y, all sharing one
/// (β′, γ′) pair. Overlapping site sets are allowed.
struct DefectSpec {
    std::vector<long> centers;
    double beta_prime{0.0};
    double gamma_prime{0.0};

    DefectSpec() = default;
    DefectSpec(std::vector<long> c, double bp = 0.0, double gp = 0.0)
        : centers(std::move(c)), beta_prime(wrap_phase(bp)), gamma_prime(wrap_phase(gp)) {
        std::sort(centers.begin(), centers.end());
        if (std::adjacent_find(centers.begin(), centers.end()) != centers.end()) {
            throw Error(ErrorKind::RangeError, "duplicate defect center", "defects.centers");
        }
    }

    bool empty() const noexcept { return centers.empty(); }

    /// Sorted union of the defect site sets.
    std::vector<long> sites() const {
        std::vector<long> e;
        for (long y : centers) {
            e.push_back(y - 1);
            e.push_back(y);
        }
        std::sort(e.begin(), e.end());
        e.erase(std::unique(e.begin(), e.end()), e.end());
        return e;
    }

    bool contains_site(long x) const {
        return std::any_of(centers.begin(), centers.end(),
                           [x](long y) { return x == y || x == y - 1; });
    }

    /// x_* = min e
    long lowest_site() const { return centers.front() - 1; }
    /// x^* = max e
    long highest_site() const { return centers.back(); }
};

enum class PerturbationKind { none, exponential };

/// Exponentially decaying random perturbation of the bulk coin:
/// ‖C₂(x) − C₀‖∞ ≤ M e^{−ρ⟨x⟩} with ⟨x⟩ = sqrt(1 + x²), and |a₂(x)| ≥ delta.
struct PerturbationSpec {
    PerturbationKind kind{PerturbationKind::none};
    double M{0.1};
    double rho{1.0};
    double delta{0.1};
    std::uint64_t seed{0};

    static PerturbationSpec exponential(double M, double rho, double delta, std::uint64_t seed) {
        PerturbationSpec s{PerturbationKind::exponential, M, rho, delta, seed};
        s.validate();
        return s;
    }

    void validate() const {
        if (!(M > 0.0)) throw Error(ErrorKind::RangeError, "M must be > 0", "perturbation.M");
        if (!(rho > 0.0)) throw Error(ErrorKind::RangeError, "rho must be > 0", "perturbation.rho");
        if (!(delta > 0.0 && delta <= 1.0)) {
            throw Error(ErrorKind::RangeError, "delta must lie in (0, 1]", "perturbation.delta");
        }
    }

    double envelope(long x) const {
        const double bracket = std::sqrt(1.0 + static_cast<double>(x) * static_cast<double>(x));
        return M * std::exp(-rho * bracket);
    }
};

/// A coin pinned on one site, applied after defects and perturbation.
struct SiteCoin {
    long site{0};
    CoinMatrix coin{CoinMatrix::Identity()};
};

// ------------------------------ coin fields ---------------------------------

struct CoinField {
    Window window;
    std::vector<CoinMatrix> coins;

    const CoinMatrix& at(long x) const { return coins[static_cast<std::size_t>(x - window.lo)]; }
    CoinMatrix& at(long x) { return coins[static_cast<std::size_t>(x - window.lo)]; }

    static CoinField constant(const Window& w, const CoinMatrix& c) {
        return CoinField{w, std::vector<CoinMatrix>(static_cast<std::size_t>(w.size()), c)};
    }

    double max_unitarity_defect() const {
        double worst = 0.0;
        for (const auto& c : coins) worst = std::max(worst, unitarity_defect(c));
        return worst;
    }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Uniform in [-1, 1) from the top 53 bits; independent of the standard
// library's distribution implementation.
inline double symmetric_unit(std::mt19937_64& gen) {
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    return 2.0 * u - 1.0;
}

}  // namespace detail

/// Perturbed bulk coin at site x. Each site draws from its own generator
/// seeded by (seed, x), so the value at x does not depend on the window.
/// The coin angle φ = arccos p is perturbed instead of p itself so that both p
/// and q move by at most the offset scale.
inline CoinMatrix perturbed_coin(const ModelParams& bulk, const PerturbationSpec& pert, long x) {
    if (pert.kind == PerturbationKind::none) return make_coin_c0(bulk);
    const double scale = std::min(1.0, pert.envelope(x) / 4.0);
    std::mt19937_64 gen(detail::splitmix64(pert.seed ^ detail::splitmix64(static_cast<std::uint64_t>(x))));
    const double d_phi = scale * detail::symmetric_unit(gen);
    const double d_alpha = scale * detail::symmetric_unit(gen);
    const double d_beta = scale * detail::symmetric_unit(gen);
    const double d_gamma = scale * detail::symmetric_unit(gen);
    const double phi = std::clamp(std::acos(bulk.p) + d_phi, 0.0, std::acos(pert.delta));
    auto local = ModelParams::make(std::cos(phi), bulk.alpha + d_alpha, bulk.beta + d_beta,
                                   bulk.gamma + d_gamma);
    return make_coin_c0(local);
}

/// C(x) = C₁ on the defect sites, C₂(x) elsewhere, then any pinned site coins.
inline CoinField assemble_coin_field(const ModelParams& params, const DefectSpec& defects,
                                     const PerturbationSpec& perturbation, const Window& window,
                                     const std::vector<SiteCoin>& overrides = {}) {
    if (!defects.empty() &&
        !(defects.lowest_site() > window.lo && defects.highest_site() < window.hi)) {
        throw Error(ErrorKind::WindowTooSmall, "defect sites must lie strictly inside the window");
    }
    const bool perturbed = perturbation.kind == PerturbationKind::exponential;
    if (perturbed) {
        perturbation.validate();
        if (params.p < perturbation.delta) {
            throw Error(ErrorKind::RangeError, "bulk p is below the perturbation delta", "model.p");
        }
    }

    const CoinMatrix c0 = make_coin_c0(params);
    const CoinMatrix c1 = make_defect_coin(defects.beta_prime, defects.gamma_prime);
    CoinField field = CoinField::constant(window, c0);
    for (long x = window.lo; x <= window.hi; ++x) {
        if (defects.contains_site(x)) {
            field.at(x) = c1;
            continue;
        }
        if (!perturbed) continue;
        const CoinMatrix c2 = perturbed_coin(params, perturbation, x);
        const double bound = perturbation.envelope(x);
        if ((c2 - c0).cwiseAbs().maxCoeff() > bound * (1.0 + 1e-12) + 1e-15 ||
            std::abs(c2(0, 0)) < perturbation.delta * (1.0 - 1e-12)) {
            throw Error(ErrorKind::EnvelopeViolation,
                        "generated coin at x=" + std::to_string(x) + " breaks the envelope");
        }
        field.at(x) = c2;
    }
    for (const auto& o : overrides) {
        if (window.contains(o.site)) field.at(o.site) = o.coin;
    }
    return field;
}

/// Everything needed to assemble the coin field on an arbitrary window.
struct FieldModel {
    ModelParams params{ModelParams::hadamard()};
    DefectSpec defects{};
    PerturbationSpec perturbation{};
    std::vector<SiteCoin> overrides{};

    CoinField assemble(const Window& w) const {
        return assemble_coin_field(params, defects, perturbation, w, overrides);
    }
};

// -------------------------------- states ------------------------------------

/// Two-component amplitudes on a window, stored (x, component) lexicographically;
/// implicitly zero outside the window.
struct State {
    Window window;
    Eigen::VectorXcd amp;

    static State zero(const Window& w) { return State{w, Eigen::VectorXcd::Zero(2 * w.size())}; }

    static State delta(const Window& w, long x, Complex up, Complex down) {
        State s = zero(w);
        s(x, 0) = up;
        s(x, 1) = down;
        return s;
    }

    Complex& operator()(long x, int comp) { return amp[window.index(x, comp)]; }
    Complex operator()(long x, int comp) const { return amp[window.index(x, comp)]; }

    /// Amplitude at (x, comp), zero outside the window.
    Complex value(long x, int comp) const {
        return window.contains(x) ? (*this)(x, comp) : Complex{};
    }

    double norm2() const { return amp.squaredNorm(); }

    /// Same amplitudes on a larger (or equal) window.
    State embedded(const Window& w) const {
        if (!w.contains(window)) throw Error(ErrorKind::WindowMismatch, "embedding into a smaller window");
        State s = zero(w);
        s.amp.segment(w.index(window.lo, 0), amp.size()) = amp;
        return s;
    }

    /// Amplitudes restricted to `w`; everything outside is dropped.
    State restricted(const Window& w) const {
        State s = zero(w);
        for (long x = std::max(w.lo, window.lo); x <= std::min(w.hi, window.hi); ++x) {
            s(x, 0) = (*this)(x, 0);
            s(x, 1) = (*this)(x, 1);
        }
        return s;
    }

    /// Smallest window (at least two sites) holding every amplitude with
    /// modulus above `tol`; nullopt for the zero state.
    std::optional<Window> support(double tol = 0.0) const {
        long lo = std::numeric_limits<long>::max();
        long hi = std::numeric_limits<long>::min();
        for (long x = window.lo; x <= window.hi; ++x) {
            if (std::abs((*this)(x, 0)) > tol || std::abs((*this)(x, 1)) > tol) {
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
        }
        if (lo > hi) return std::nullopt;
        if (hi == lo) ++hi;
        return Window(lo, hi);
    }
};

/// (T_y ψ)(x) = ψ(x − y)
inline State translate(const State& s, long y) { return State{s.window.shifted(y), s.amp}; }

enum class Boundary { padded, periodic, truncate };

inline const char* to_string(Boundary b) noexcept {
    switch (b) {
        case Boundary::padded: return "padded";
        case Boundary::periodic: return "periodic";
        case Boundary::truncate: return "truncate";
    }
    return "padded";
}

/// One application of U = S C.
///   padded:   output window grows by one site on each side (exact on Z)
///   periodic: shift wraps around the window (state and field windows equal)
///   truncate: amplitudes leaving the window are dropped
inline State step(const State& s, const CoinField& field, Boundary boundary) {
    if (boundary == Boundary::periodic ? !(s.window == field.window)
                                       : !field.window.contains(s.window)) {
        throw Error(ErrorKind::WindowMismatch, "state window not covered by the coin field");
    }
    const Window& w = s.window;
    State out = State::zero(boundary == Boundary::padded ? w.expanded(1) : w);
    for (long x = w.lo; x <= w.hi; ++x) {
        const Eigen::Vector2cd v = field.at(x) * Eigen::Vector2cd(s(x, 0), s(x, 1));
        long left = x - 1;
        long right = x + 1;
        if (boundary == Boundary::periodic) {
            if (left < w.lo) left = w.hi;
            if (right > w.hi) right = w.lo;
        }
        if (out.window.contains(left)) out(left, 0) += v[0];
        if (out.window.contains(right)) out(right, 1) += v[1];
    }
    return out;
}

/// ψ(t) = U^t ψ₀ for t = 0..steps. In padded mode the field must cover the
/// support of ψ₀ widened by `steps` sites; the walk never leaves that region.
inline std::vector<State> evolve(const State& psi0, const CoinField& field, long steps,
                                 Boundary boundary) {
    if (steps < 0) throw Error(ErrorKind::RangeError, "steps must be >= 0", "steps");
    std::vector<State> traj;
    traj.reserve(static_cast<std::size_t>(steps) + 1);
    traj.push_back(psi0);
    if (steps == 0) return traj;

    State cur = psi0;
    if (boundary == Boundary::padded) {
        const auto supp = psi0.support();
        const Window start = supp ? *supp : Window(psi0.window.lo, psi0.window.lo + 1);
        if (!field.window.contains(start.expanded(steps))) {
            throw Error(ErrorKind::WindowTooSmall,
                        "coin field must cover the initial support widened by the step count");
        }
        cur = psi0.restricted(start);
    }
    for (long t = 0; t < steps; ++t) {
        cur = step(cur, field, boundary);
        traj.push_back(cur);
    }
    return traj;
}

/// P(x) = |a⁰(x)|² + |a¹(x)|² on every window site.
inline std::map<long, double> position_distribution(const State& s) {
    std::map<long, double> out;
    for (long x = s.window.lo; x <= s.window.hi; ++x) {
        out[x] = std::norm(s(x, 0)) + std::norm(s(x, 1));
    }
    return out;
}

}  // namespace qws
