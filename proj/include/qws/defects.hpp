// defects.hpp: compactly supported eigenfunctions created by edge defects,
// compact-kernel search and the defect verdict.
//
// A single defect pair {y − 1, y} traps the states
//     ψ±(x) = (1/√2) [∓i e^{i(β′−γ′/2)} δ(x + 1 − y), δ(x − y)]
// with eigenvalues ±i e^{iγ′/2}; any combination over the defect centers is an
// eigenfunction of the full walk supported inside the defect sites.

#pragma once

#include "qws/core.hpp"
#include "qws/lattice.hpp"
#include "qws/spectra.hpp"
#include "qws/symbol.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace qws {

enum class Sign { plus, minus };

struct DefectEigenfunction {
    Sign sign{Sign::plus};
    double beta_prime{0.0};
    double gamma_prime{0.0};
    std::vector<Complex> kappas;
    State state;

    /// ±i e^{iγ′/2}
    Complex eigenvalue() const {
        return (sign == Sign::plus ? kI : -kI) * std::polar(1.0, gamma_prime / 2.0);
    }
};

/// Ψ± = Σ_j κ_j T_{y_j} ψ±, normalized, on the window [x_*, x^*].
inline DefectEigenfunction build_defect_eigenfunction(const DefectSpec& defects,
                                                      const std::vector<Complex>& kappas, Sign sign) {
    if (defects.empty()) throw Error(ErrorKind::RangeError, "no defect centers", "defects.centers");
    if (kappas.size() != defects.centers.size()) {
        throw Error(ErrorKind::RangeError, "one coefficient per defect center is required", "kappas");
    }
    if (std::all_of(kappas.begin(), kappas.end(), [](Complex k) { return k == Complex{}; })) {
        throw Error(ErrorKind::AllZeroCoefficients, "all defect coefficients are zero");
    }
    const Complex up = (sign == Sign::plus ? -kI : kI) *
                       std::polar(1.0, defects.beta_prime - defects.gamma_prime / 2.0) / std::numbers::sqrt2;
    const Complex down = 1.0 / std::numbers::sqrt2;

    State s = State::zero(Window(defects.lowest_site(), defects.highest_site()));
    for (std::size_t j = 0; j < kappas.size(); ++j) {
        const long y = defects.centers[j];
        s(y - 1, 0) += kappas[j] * up;
        s(y, 1) += kappas[j] * down;
    }
    s.amp /= s.amp.norm();
    return DefectEigenfunction{sign, defects.beta_prime, defects.gamma_prime, kappas, std::move(s)};
}

/// Equal weights 1/√N over the N defect centers.
inline DefectEigenfunction build_defect_eigenfunction(const DefectSpec& defects, Sign sign) {
    const double w = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, defects.centers.size())));
    return build_defect_eigenfunction(defects, std::vector<Complex>(defects.centers.size(), w), sign);
}

/// ‖U ψ − λ ψ‖ evaluated exactly on Z.
inline double verify_eigenpair(const CoinField& field, Complex lambda, const State& state) {
    if (!field.window.contains(state.window.expanded(1))) {
        throw Error(ErrorKind::WindowTooSmall, "coin field must cover the state with a one-site margin");
    }
    const State out = step(state, field, Boundary::padded);
    return (out.amp - lambda * state.embedded(out.window).amp).norm();
}

// ------------------------------ compact kernels -----------------------------

/// Matrix of ψ ↦ (U − λ)ψ from amplitudes on `support` to amplitudes on
/// `support` widened by one site.
inline Eigen::MatrixXcd compact_map(const CoinField& field, Complex lambda, const Window& support) {
    const Window target = support.expanded(1);
    if (!field.window.contains(target)) {
        throw Error(ErrorKind::WindowTooSmall, "support must sit inside the coin field with a one-site margin");
    }
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(2 * target.size(), 2 * support.size());
    for (long x = support.lo; x <= support.hi; ++x) {
        const CoinMatrix& c = field.at(x);
        for (int comp = 0; comp < 2; ++comp) {
            const Eigen::Index col = support.index(x, comp);
            a(target.index(x - 1, 0), col) += c(0, comp);
            a(target.index(x + 1, 1), col) += c(1, comp);
            a(target.index(x, comp), col) -= lambda;
        }
    }
    return a;
}

inline constexpr double kNullRatio = 1e-10;

/// Orthonormal basis of {ψ : supp ψ ⊆ support, (U − λ)ψ = 0}: right singular
/// vectors whose singular value is at most `null_ratio` times the largest.
inline std::vector<State> compact_kernel(const CoinField& field, Complex lambda, const Window& support,
                                         double null_ratio = kNullRatio) {
    const Eigen::MatrixXcd a = compact_map(field, lambda, support);
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double cutoff = null_ratio * sv[0];
    std::vector<State> basis;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv[i] <= cutoff) basis.push_back(State{support, svd.matrixV().col(i)});
    }
    return basis;
}

// -------------------------------- detection ---------------------------------

enum class DetectMethod { compact_kernel, spectral_localization };

inline const char* to_string(DetectMethod m) noexcept {
    return m == DetectMethod::compact_kernel ? "compact_kernel" : "spectral_localization";
}

struct DetectConfig {
    DetectMethod method{DetectMethod::compact_kernel};
    double theta_step{0.01};
    double threshold_radius{0.05};
    double null_ratio{kNullRatio};
    /// grid minima with σ_min/σ_max below this are refined
    double screen_ratio{0.05};
    int refine_iterations{12};
    /// localized eigenvalues must recur within this distance at the doubled window
    double stability{1e-6};
    /// also test ±i e^{iγ′/2} when the model carries defect phases
    bool use_known_phases{true};
    /// kernel support for the scan; defaults to the window minus a one-site margin
    std::optional<Window> support{};
    ClassifyTolerances classify{};
    /// worker cap; 0 reads QWS_THREADS, falling back to the hardware count
    unsigned threads{0};
};

struct DefectEvidence {
    Complex lambda;
    int kernel_dim{0};
    long x_lo{0};
    long x_hi{0};
};

struct DetectionReport {
    bool verdict{false};
    DetectMethod method{DetectMethod::compact_kernel};
    std::vector<DefectEvidence> evidence;
    BandStructure band;
    DetectConfig config;
    /// number of λ values at which a compact kernel was evaluated
    std::size_t evaluations{0};
};

namespace detail {

inline unsigned worker_count(unsigned requested) {
    unsigned n = requested;
    if (n == 0) {
        if (const char* env = std::getenv("QWS_THREADS")) n = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
    }
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

// Deterministic parallel map: f(i) is written to slot i.
template <class T, class F>
std::vector<T> parallel_map(std::size_t count, unsigned workers, F&& f) {
    std::vector<T> out(count);
    workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), std::max<std::size_t>(1, count)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) out[i] = f(i);
        return out;
    }
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += workers) out[i] = f(i);
        });
    }
    pool.clear();
    return out;
}

inline std::optional<Window> kernel_extent(const std::vector<State>& basis, double tol) {
    std::optional<Window> ext;
    for (const auto& s : basis) {
        const auto supp = s.support(tol);
        if (!supp) continue;
        ext = ext ? Window(std::min(ext->lo, supp->lo), std::max(ext->hi, supp->hi)) : *supp;
    }
    return ext;
}

inline void merge_evidence(std::vector<DefectEvidence>& ev, const DefectEvidence& e) {
    for (auto& existing : ev) {
        if (std::abs(existing.lambda - e.lambda) <= 1e-8) {
            if (e.kernel_dim > existing.kernel_dim) existing = e;
            return;
        }
    }
    ev.push_back(e);
}

inline double min_ratio(const Eigen::MatrixXcd& a) {
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(a);
    const auto& sv = svd.singularValues();
    return sv[sv.size() - 1] / sv[0];
}

// Rayleigh-type refinement of a near-kernel: alternate the smallest right
// singular vector v of (U − λ) and λ ← ⟨v, U v⟩ projected onto the circle.
inline std::optional<Complex> refine_kernel_lambda(const CoinField& field, const Window& support, Complex lambda,
                                                   const BandStructure& band, const DetectConfig& cfg,
                                                   std::size_t& evaluations) {
    double previous = std::numeric_limits<double>::infinity();
    for (int it = 0; it < cfg.refine_iterations; ++it) {
        const Eigen::MatrixXcd a = compact_map(field, lambda, support);
        ++evaluations;
        Eigen::BDCSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        const double ratio = sv[sv.size() - 1] / sv[0];
        if (ratio <= cfg.null_ratio) return lambda;
        // a genuine kernel converges quadratically; anything slower is a plain minimum
        if (ratio > 0.1 * previous) return std::nullopt;
        previous = ratio;
        const Eigen::VectorXcd v = svd.matrixV().col(sv.size() - 1);
        // U v on the widened window is (A + λ E) v, E the embedding
        const Window target = support.expanded(1);
        Eigen::VectorXcd uv = a * v;
        uv.segment(target.index(support.lo, 0), v.size()) += lambda * v;
        Complex next = v.dot(uv.segment(target.index(support.lo, 0), v.size()));
        if (std::abs(next) == 0.0) return std::nullopt;
        next /= std::abs(next);
        if (!band.in_interior(phase_of(next), cfg.threshold_radius)) return std::nullopt;
        if (std::abs(next - lambda) < 1e-16) return next;
        lambda = next;
    }
    return lambda;
}

inline std::vector<DefectEvidence> scan_compact_kernels(const FieldModel& model, const Window& window,
                                                        const BandStructure& band, const DetectConfig& cfg,
                                                        std::size_t& evaluations) {
    const CoinField field = model.assemble(window);
    const Window support = cfg.support ? *cfg.support : Window(window.lo + 1, window.hi - 1);
    const unsigned workers = worker_count(cfg.threads);
    std::vector<DefectEvidence> evidence;

    auto record = [&](Complex lambda) {
        const auto basis = compact_kernel(field, lambda, support, cfg.null_ratio);
        ++evaluations;
        if (basis.empty()) return;
        const auto ext = kernel_extent(basis, 1e-10);
        merge_evidence(evidence, DefectEvidence{lambda, static_cast<int>(basis.size()), ext ? ext->lo : support.lo,
                                                ext ? ext->hi : support.hi});
    };

    // θ grid over the arc interiors, half a step off the exclusion edge
    std::vector<std::vector<double>> grids;
    for (const Arc& arc : band.arcs) {
        std::vector<double> g;
        const double usable = arc.length() - 2.0 * cfg.threshold_radius;
        for (double off = 0.5 * cfg.theta_step; off < usable; off += cfg.theta_step) {
            const double theta = wrap_phase(arc.lo + cfg.threshold_radius + off);
            if (band.distance_to_threshold(theta) > cfg.threshold_radius) g.push_back(theta);
        }
        grids.push_back(std::move(g));
    }

    std::vector<Complex> candidates;
    for (const auto& g : grids) {
        const auto ratios = parallel_map<double>(g.size(), workers, [&](std::size_t i) {
            return min_ratio(compact_map(field, std::polar(1.0, g[i]), support));
        });
        evaluations += g.size();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const bool left_ok = i == 0 || ratios[i] <= ratios[i - 1];
            const bool right_ok = i + 1 == g.size() || ratios[i] <= ratios[i + 1];
            if (ratios[i] <= cfg.null_ratio) {
                candidates.push_back(std::polar(1.0, g[i]));
            } else if (left_ok && right_ok && ratios[i] <= cfg.screen_ratio) {
                if (auto refined = refine_kernel_lambda(field, support, std::polar(1.0, g[i]), band, cfg, evaluations)) {
                    candidates.push_back(*refined);
                }
            }
        }
    }
    if (cfg.use_known_phases && !model.defects.empty()) {
        const Complex g = std::polar(1.0, model.defects.gamma_prime / 2.0);
        for (Complex lambda : {kI * g, -kI * g}) {
            if (band.in_interior(phase_of(lambda), cfg.threshold_radius)) candidates.push_back(lambda);
        }
    }
    for (Complex lambda : candidates) record(lambda);
    return evidence;
}

inline Window doubled(const Window& w) {
    const long grow = w.size() / 2;
    return Window(w.lo - grow, w.hi + grow);
}

inline std::vector<DefectEvidence> scan_spectral_localization(const FieldModel& model, const Window& window,
                                                              const BandStructure& band, const DetectConfig& cfg) {
    auto solve = [&](const Window& w) {
        const CoinField field = model.assemble(w);
        return classify(eigendecompose(build_matrix(field, w, Boundary::periodic), cfg.classify.radius), band,
                        cfg.classify);
    };
    const SpectrumReport small = solve(window);
    const SpectrumReport large = solve(doubled(window));

    std::vector<DefectEvidence> evidence;
    for (std::size_t i = 0; i < small.eigenpairs.size(); ++i) {
        if (small.labels[i] != SpectralLabel::band_localized_embedded) continue;
        const Complex lambda = small.eigenpairs[i].lambda;
        bool stable = false;
        for (std::size_t j = 0; j < large.eigenpairs.size() && !stable; ++j) {
            stable = large.labels[j] == SpectralLabel::band_localized_embedded &&
                     std::abs(large.eigenpairs[j].lambda - lambda) <= cfg.stability;
        }
        if (!stable) continue;
        const State s{window, small.eigenpairs[i].vector};
        const double peak = s.amp.cwiseAbs().maxCoeff();
        const auto supp = s.support(1e-8 * peak);
        DefectEvidence e{lambda, 1, supp ? supp->lo : window.lo, supp ? supp->hi : window.hi};
        bool merged = false;
        for (auto& existing : evidence) {
            if (std::abs(existing.lambda - lambda) <= 1e-8) {
                ++existing.kernel_dim;
                existing.x_lo = std::min(existing.x_lo, e.x_lo);
                existing.x_hi = std::max(existing.x_hi, e.x_hi);
                merged = true;
                break;
            }
        }
        if (!merged) evidence.push_back(e);
    }
    return evidence;
}

}  // namespace detail

/// Edge defects are present iff U has an eigenvalue inside σ_ess away from the
/// thresholds. `window` is the lattice region searched (and, for the spectral
/// method, the smaller of the two periodic truncations).
inline DetectionReport detect_edge_defects(const FieldModel& model, const Window& window,
                                           const DetectConfig& config = {}) {
    DetectionReport report;
    report.method = config.method;
    report.config = config;
    report.band = essential_band(model.params);
    if (!model.defects.empty() &&
        !(model.defects.lowest_site() > window.lo + 1 && model.defects.highest_site() < window.hi - 1)) {
        throw Error(ErrorKind::WindowTooSmall, "defects must sit inside the detection window with margin");
    }
    if (config.method == DetectMethod::compact_kernel) {
        report.evidence = detail::scan_compact_kernels(model, window, report.band, config, report.evaluations);
    } else {
        report.evidence = detail::scan_spectral_localization(model, window, report.band, config);
    }
    std::sort(report.evidence.begin(), report.evidence.end(),
              [](const DefectEvidence& a, const DefectEvidence& b) { return phase_of(a.lambda) < phase_of(b.lambda); });
    report.verdict = !report.evidence.empty();
    return report;
}

}  // namespace qws
