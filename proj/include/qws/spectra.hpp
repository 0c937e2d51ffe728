// spectra.hpp: finite truncations of U, their full eigendecomposition and the
// classification of eigenvalues against the bulk band structure.

#pragma once

#include "qws/core.hpp"
#include "qws/lattice.hpp"
#include "qws/symbol.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace qws {

/// Dense matrix of U on a window, basis ordered (x, component) by x then component.
struct TruncatedOperator {
    Window window;
    Boundary boundary{Boundary::periodic};
    Eigen::MatrixXcd matrix;

    Eigen::Index dimension() const noexcept { return matrix.rows(); }
};

/// Column (x, c) holds U e_{x,c}: C(x)_{0c} at row (x−1, 0) and C(x)_{1c} at
/// row (x+1, 1). Rows leaving the window wrap (periodic) or are dropped (truncate).
inline TruncatedOperator build_matrix(const CoinField& field, const Window& window, Boundary boundary) {
    if (!field.window.contains(window)) {
        throw Error(ErrorKind::WindowMismatch, "truncation window not covered by the coin field");
    }
    if (boundary == Boundary::padded) {
        throw Error(ErrorKind::UnsupportedParameter, "a truncated operator is periodic or truncate");
    }
    const Eigen::Index dim = 2 * window.size();
    TruncatedOperator op{window, boundary, Eigen::MatrixXcd::Zero(dim, dim)};
    for (long x = window.lo; x <= window.hi; ++x) {
        long left = x - 1;
        long right = x + 1;
        if (boundary == Boundary::periodic) {
            if (left < window.lo) left = window.hi;
            if (right > window.hi) right = window.lo;
        }
        const CoinMatrix& c = field.at(x);
        for (int comp = 0; comp < 2; ++comp) {
            const Eigen::Index col = window.index(x, comp);
            if (window.contains(left)) op.matrix(window.index(left, 0), col) += c(0, comp);
            if (window.contains(right)) op.matrix(window.index(right, 1), col) += c(1, comp);
        }
    }
    return op;
}

struct Eigenpair {
    Complex lambda;
    double phase{0.0};
    Eigen::VectorXcd vector;
    double residual{0.0};
};

/// Largest probability mass of `v` inside any block of 2·radius + 1 consecutive
/// sites (both components counted). `v` is laid out (x, component).
inline double localization_measure(const Eigen::VectorXcd& v, long radius = 10) {
    const Eigen::Index sites = v.size() / 2;
    if (sites == 0) return 0.0;
    std::vector<double> prefix(static_cast<std::size_t>(sites) + 1, 0.0);
    for (Eigen::Index s = 0; s < sites; ++s) {
        prefix[static_cast<std::size_t>(s) + 1] =
            prefix[static_cast<std::size_t>(s)] + std::norm(v[2 * s]) + std::norm(v[2 * s + 1]);
    }
    const double total = prefix.back();
    if (total == 0.0) return 0.0;
    double best = 0.0;
    for (Eigen::Index c = 0; c < sites; ++c) {
        const auto lo = static_cast<std::size_t>(std::max<Eigen::Index>(0, c - radius));
        const auto hi = static_cast<std::size_t>(std::min<Eigen::Index>(sites, c + radius + 1));
        best = std::max(best, prefix[hi] - prefix[lo]);
    }
    return best / total;
}

struct EigenOptions {
    /// eigenvalues closer than this (times the matrix scale) share an eigenspace
    double cluster_tol{1e-9};
    /// residual contract, times the matrix scale
    double residual_tol{1e-8};
    /// when > 0, degenerate eigenspaces are rotated so that their basis vectors
    /// are maximally concentrated within this many sites of some center
    long localize_radius{0};
};

namespace detail {

inline Eigen::MatrixXcd orthonormalize(const Eigen::MatrixXcd& y) {
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(y);
    return qr.householderQ() * Eigen::MatrixXcd::Identity(y.rows(), y.cols());
}

// Greedy rotation of an orthonormal basis: repeatedly pick the unit vector of
// the remaining span carrying the most mass inside one site block, keep it and
// continue in its orthogonal complement.
inline Eigen::MatrixXcd localize_basis(const Eigen::MatrixXcd& basis, long radius) {
    const Eigen::Index sites = basis.rows() / 2;
    Eigen::MatrixXcd q = basis;
    Eigen::MatrixXcd out(basis.rows(), basis.cols());
    Eigen::Index filled = 0;
    while (q.cols() > 1) {
        const Eigen::Index k = q.cols();
        // prefix sums of per-site Gram contributions
        std::vector<Eigen::MatrixXcd> prefix(static_cast<std::size_t>(sites) + 1,
                                             Eigen::MatrixXcd::Zero(k, k));
        for (Eigen::Index s = 0; s < sites; ++s) {
            prefix[static_cast<std::size_t>(s) + 1] =
                prefix[static_cast<std::size_t>(s)] + q.middleRows(2 * s, 2).adjoint() * q.middleRows(2 * s, 2);
        }
        double best = -1.0;
        Eigen::MatrixXcd best_vectors;
        for (Eigen::Index c = 0; c < sites; ++c) {
            const auto lo = static_cast<std::size_t>(std::max<Eigen::Index>(0, c - radius));
            const auto hi = static_cast<std::size_t>(std::min<Eigen::Index>(sites, c + radius + 1));
            const Eigen::MatrixXcd gram = prefix[hi] - prefix[lo];
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram);
            const double top = es.eigenvalues()[k - 1];
            if (top > best + 1e-14) {
                best = top;
                best_vectors = es.eigenvectors();
            }
        }
        out.col(filled++) = q * best_vectors.col(k - 1);
        q = q * best_vectors.leftCols(k - 1);
    }
    out.col(filled) = q.col(0);
    return out;
}

}  // namespace detail

/// Complete eigendecomposition of a dense complex matrix.
///
/// Complex Schur form M = Z T Z* (Hessenberg reduction + shifted QR), then for
/// every cluster of (numerically) equal eigenvalues an orthonormal basis of its
/// eigenspace by two steps of subspace inverse iteration on T. Pairs come out
/// ordered by cluster phase, then modulus. Each residual ‖Mv − λv‖ is checked
/// by direct multiplication.
inline std::vector<Eigenpair> eigendecompose(const Eigen::MatrixXcd& m, const EigenOptions& opts = {}) {
    const Eigen::Index n = m.rows();
    if (n == 0 || m.cols() != n) throw Error(ErrorKind::WindowMismatch, "matrix must be square and non-empty");
    if (n > 4096) throw Error(ErrorKind::UnsupportedParameter, "dimension above 4096");

    Eigen::ComplexSchur<Eigen::MatrixXcd> schur(m);
    if (schur.info() != Eigen::Success) {
        throw Error(ErrorKind::ConvergenceFailure, "Schur iteration did not converge");
    }
    const Eigen::MatrixXcd& t = schur.matrixT();
    const Eigen::MatrixXcd& z = schur.matrixU();
    const double scale = std::max(1.0, m.norm() / std::sqrt(static_cast<double>(n)));
    const double ctol = opts.cluster_tol * scale;

    // single-linkage clusters of the diagonal of T
    std::vector<Eigen::Index> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](Eigen::Index i) {
        while (parent[static_cast<std::size_t>(i)] != i) {
            i = parent[static_cast<std::size_t>(i)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
        }
        return i;
    };
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (std::abs(t(i, i) - t(j, j)) <= ctol) parent[static_cast<std::size_t>(find(j))] = find(i);
        }
    }
    std::vector<std::vector<Eigen::Index>> clusters;
    {
        std::vector<Eigen::Index> slot(static_cast<std::size_t>(n), -1);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index r = find(i);
            if (slot[static_cast<std::size_t>(r)] < 0) {
                slot[static_cast<std::size_t>(r)] = static_cast<Eigen::Index>(clusters.size());
                clusters.emplace_back();
            }
            clusters[static_cast<std::size_t>(slot[static_cast<std::size_t>(r)])].push_back(i);
        }
    }

    struct Group {
        Complex center;
        std::vector<Eigenpair> pairs;
    };
    std::vector<Group> groups;
    groups.reserve(clusters.size());
    for (const auto& members : clusters) {
        const auto k = static_cast<Eigen::Index>(members.size());
        Complex mean{};
        double spread = 0.0;
        for (auto i : members) mean += t(i, i);
        mean /= static_cast<double>(k);
        for (auto i : members) spread = std::max(spread, std::abs(t(i, i) - mean));
        const Complex shift = mean + std::polar(std::max(4.0 * spread, 1e-13 * scale), 0.25 * kPi);

        Eigen::MatrixXcd tm = t;
        tm.diagonal().array() -= shift;
        Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, k);
        for (Eigen::Index c = 0; c < k; ++c) y(members[static_cast<std::size_t>(c)], c) = 1.0;
        for (int it = 0; it < 2; ++it) {
            y = tm.triangularView<Eigen::Upper>().solve(y);
            y = detail::orthonormalize(y);
        }
        Eigen::MatrixXcd x = z * y;
        if (opts.localize_radius > 0 && k > 1) x = detail::localize_basis(x, opts.localize_radius);

        Group g{mean, {}};
        for (Eigen::Index c = 0; c < k; ++c) {
            Eigen::VectorXcd v = x.col(c).normalized();
            const Eigen::VectorXcd mv = m * v;
            const Complex lambda = v.dot(mv);
            const double res = (mv - lambda * v).norm();
            if (!(res <= opts.residual_tol * scale)) {
                throw Error(ErrorKind::ConvergenceFailure,
                            "eigenpair residual " + std::to_string(res) + " above target");
            }
            g.pairs.push_back(Eigenpair{lambda, phase_of(lambda), std::move(v), res});
        }
        groups.push_back(std::move(g));
    }

    std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
        const double pa = phase_of(a.center), pb = phase_of(b.center);
        if (pa != pb) return pa < pb;
        return std::abs(a.center) < std::abs(b.center);
    });
    std::vector<Eigenpair> out;
    out.reserve(static_cast<std::size_t>(n));
    for (auto& g : groups) {
        for (auto& p : g.pairs) out.push_back(std::move(p));
    }
    return out;
}

/// Eigendecomposition of a truncation; degenerate eigenspaces are returned in a
/// spatially concentrated basis (radius in sites).
inline std::vector<Eigenpair> eigendecompose(const TruncatedOperator& op, long localize_radius = 10) {
    EigenOptions opts;
    opts.localize_radius = localize_radius;
    return eigendecompose(op.matrix, opts);
}

// ------------------------------ classification ------------------------------

enum class SpectralLabel { band_extended, band_localized_embedded, gap_discrete, near_threshold, non_unimodular };

inline const char* to_string(SpectralLabel l) noexcept {
    switch (l) {
        case SpectralLabel::band_extended: return "band_extended";
        case SpectralLabel::band_localized_embedded: return "band_localized_embedded";
        case SpectralLabel::gap_discrete: return "gap_discrete";
        case SpectralLabel::near_threshold: return "near_threshold";
        case SpectralLabel::non_unimodular: return "non_unimodular";
    }
    return "band_extended";
}

struct ClassifyTolerances {
    double circle{1e-6};
    double threshold_radius{0.05};
    double band_edge{1e-9};
    double localization{0.99};
    long radius{10};

    /// Defaults for a boundary mode; hard truncation gets a wider band edge.
    static ClassifyTolerances for_boundary(Boundary b) {
        ClassifyTolerances t;
        if (b == Boundary::truncate) t.band_edge = 0.02;
        return t;
    }
};

struct SpectrumReport {
    std::vector<Eigenpair> eigenpairs;
    std::vector<SpectralLabel> labels;
    std::vector<double> localization;
    BandStructure band;
    ClassifyTolerances tolerances;

    std::size_t count(SpectralLabel l) const {
        return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l));
    }
};

/// Rules, first match wins:
///   non_unimodular           ||λ| − 1| > circle
///   near_threshold           phase within threshold_radius of a threshold
///   gap_discrete             phase farther than band_edge outside every arc
///   band_localized_embedded  localization measure ≥ localization
///   band_extended            otherwise
inline SpectrumReport classify(std::vector<Eigenpair> pairs, const BandStructure& band,
                               const ClassifyTolerances& tol = {}) {
    SpectrumReport r;
    r.band = band;
    r.tolerances = tol;
    r.labels.reserve(pairs.size());
    r.localization.reserve(pairs.size());
    for (const auto& p : pairs) {
        const double loc = localization_measure(p.vector, tol.radius);
        r.localization.push_back(loc);
        SpectralLabel label = SpectralLabel::band_extended;
        if (std::abs(std::abs(p.lambda) - 1.0) > tol.circle) {
            label = SpectralLabel::non_unimodular;
        } else if (band.distance_to_threshold(p.phase) <= tol.threshold_radius) {
            label = SpectralLabel::near_threshold;
        } else if (!band.in_band(p.phase, tol.band_edge)) {
            label = SpectralLabel::gap_discrete;
        } else if (loc >= tol.localization) {
            label = SpectralLabel::band_localized_embedded;
        }
        r.labels.push_back(label);
    }
    r.eigenpairs = std::move(pairs);
    return r;
}

/// Build, solve and classify in one go.
inline SpectrumReport analyze_spectrum(const CoinField& field, const Window& window, Boundary boundary,
                                       const ModelParams& bulk, const ClassifyTolerances& tol) {
    const auto op = build_matrix(field, window, boundary);
    return classify(eigendecompose(op, tol.radius), essential_band(bulk), tol);
}

}  // namespace qws
