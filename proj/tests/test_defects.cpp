#include "qws/defects.hpp"
#include "qws/scenarios.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace qws;

namespace {

constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

Complex inner(const State& a, const State& b) {
    const Window w(std::min(a.window.lo, b.window.lo), std::max(a.window.hi, b.window.hi));
    return a.embedded(w).amp.dot(b.embedded(w).amp);
}

// γ′ with (γ′ + π)/2 inside a band arc, at least `margin` from every threshold
double admissible_gamma_prime(const BandStructure& band, std::mt19937_64& gen, double margin) {
    std::uniform_real_distribution<double> u(0.0, kTwoPi);
    for (;;) {
        const double gp = u(gen);
        if (band.in_interior(wrap_phase((gp + kPi) / 2.0), margin)) return gp;
    }
}

DetectConfig blind_config() {
    DetectConfig c;
    c.use_known_phases = false;
    return c;
}

}  // namespace

TEST(Eigenfunction, SingleDefectAmplitudes) {
    const auto ef = build_defect_eigenfunction(DefectSpec({0}), {1.0}, Sign::plus);
    EXPECT_EQ(ef.state.window, Window(-1, 0));
    EXPECT_LE(std::abs(ef.state(-1, 0) - Complex(0, -kInvSqrt2)), 1e-15);
    EXPECT_LE(std::abs(ef.state(0, 1) - kInvSqrt2), 1e-15);
    EXPECT_EQ(ef.state(-1, 1), Complex{});
    EXPECT_EQ(ef.state(0, 0), Complex{});
    EXPECT_LE(std::abs(ef.eigenvalue() - kI), 1e-15);
}

TEST(Eigenfunction, SingleDefectIsEigenvectorOfPureDefectField) {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(0.0, kTwoPi);
    for (int i = 0; i < 50; ++i) {
        const double bp = u(gen), gp = u(gen);
        const CoinField pure = CoinField::constant(Window::symmetric(4), make_defect_coin(bp, gp));
        for (Sign s : {Sign::plus, Sign::minus}) {
            const auto ef = build_defect_eigenfunction(DefectSpec({0}, bp, gp), {1.0}, s);
            EXPECT_LE(verify_eigenpair(pure, ef.eigenvalue(), ef.state), 1e-12);
        }
    }
}

TEST(Eigenfunction, ShiftedCoefficientsAreOrthogonal) {
    const DefectSpec d({0, 1});
    const auto a = build_defect_eigenfunction(d, {1.0, 0.0}, Sign::plus);
    const auto b = build_defect_eigenfunction(d, {0.0, 1.0}, Sign::plus);
    EXPECT_NEAR(std::abs(inner(a.state, b.state)), 0.0, 1e-15);
}

TEST(Eigenfunction, AllZeroCoefficients) {
    try {
        build_defect_eigenfunction(DefectSpec({0, 4}), {0.0, 0.0}, Sign::minus);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::AllZeroCoefficients);
    }
    EXPECT_THROW(build_defect_eigenfunction(DefectSpec({0, 4}), {1.0}, Sign::minus), Error);
}

TEST(Eigenfunction, ExactnessAndSupportProperty) {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<long> pos(-10, 10);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 100; ++trial) {
        std::set<long> centers;
        const int count = 1 + trial % 4;
        while (static_cast<int>(centers.size()) < count) centers.insert(pos(gen));
        const DefectSpec d(std::vector<long>(centers.begin(), centers.end()), kTwoPi * u(gen), kTwoPi * u(gen));
        const FieldModel m{ModelParams::make(0.05 + 0.9 * u(gen), 7 * u(gen), 7 * u(gen), 7 * u(gen)), d,
                           trial % 2 ? PerturbationSpec::exponential(0.3, 0.5, 0.05, trial) : PerturbationSpec{}, {}};
        const CoinField f = m.assemble(Window::symmetric(14));
        std::vector<Complex> kappas;
        for (int j = 0; j < count; ++j) kappas.emplace_back(n(gen), n(gen));
        for (Sign s : {Sign::plus, Sign::minus}) {
            const auto ef = build_defect_eigenfunction(d, kappas, s);
            EXPECT_NEAR(ef.state.norm2(), 1.0, 1e-14);
            EXPECT_LE(verify_eigenpair(f, ef.eigenvalue(), ef.state), 1e-12);
            for (long x = ef.state.window.lo; x <= ef.state.window.hi; ++x) {
                if (!centers.count(x + 1)) {
                    EXPECT_EQ(ef.state(x, 0), Complex{}) << x;
                }
                if (!centers.count(x)) {
                    EXPECT_EQ(ef.state(x, 1), Complex{}) << x;
                }
            }
        }
    }
}

TEST(VerifyEigenpair, EdgeDefectScenario) {
    const Window w = Window::symmetric(10);
    const CoinField f = scenarios::edge_defect_model().assemble(w);
    const DefectSpec d({0, 1});
    const auto plus = build_defect_eigenfunction(d, {kInvSqrt2, kInvSqrt2}, Sign::plus);
    EXPECT_LE(verify_eigenpair(f, kI, plus.state), 1e-12);
    EXPECT_GE(verify_eigenpair(f, 1.0, plus.state), 0.5);
    const auto minus = build_defect_eigenfunction(d, Sign::minus);
    EXPECT_LE(verify_eigenpair(f, -kI, minus.state), 1e-12);
    EXPECT_THROW(verify_eigenpair(CoinField::constant(Window(-1, 1), CoinMatrix::Identity()), kI, plus.state), Error);
}

TEST(CompactKernel, EdgeDefectHasTwoDimensionalKernel) {
    const Window w = Window::symmetric(12);
    const CoinField f = scenarios::edge_defect_model().assemble(w);
    const auto basis = compact_kernel(f, kI, Window(-1, 1));
    ASSERT_EQ(basis.size(), 2u);
    // oracle span: the two translated single-defect states
    const DefectSpec d({0, 1});
    const State t0 = build_defect_eigenfunction(d, {1.0, 0.0}, Sign::plus).state;
    const State t1 = build_defect_eigenfunction(d, {0.0, 1.0}, Sign::plus).state;
    for (const auto& b : basis) {
        EXPECT_NEAR(b.norm2(), 1.0, 1e-12);
        const double captured = std::norm(inner(t0, b)) + std::norm(inner(t1, b));
        EXPECT_NEAR(captured, 1.0, 1e-10);
        EXPECT_LE(verify_eigenpair(f, kI, b), 1e-10);
    }
    EXPECT_NEAR(std::abs(inner(basis[0], basis[1])), 0.0, 1e-12);
}

TEST(CompactKernel, VertexAndBulkHaveNone) {
    const Window w = Window::symmetric(14);
    EXPECT_TRUE(compact_kernel(scenarios::vertex_model().assemble(w), kI, Window(-10, 10)).empty());
    EXPECT_TRUE(compact_kernel(scenarios::bulk_model().assemble(w), kI, Window(-10, 10)).empty());
    EXPECT_TRUE(compact_kernel(scenarios::bulk_model().assemble(w), std::polar(1.0, 2.0), Window(-3, 6)).empty());
}

TEST(CompactKernel, BasisStaysInsideSupport) {
    const Window w = Window::symmetric(12);
    const CoinField f = FieldModel{ModelParams::make(0.6, 1, 2, 3), DefectSpec({-3, 0, 4}, 1.0, 0.5), {}, {}}.assemble(w);
    const Window support(-6, 6);
    const Complex lambda = kI * std::polar(1.0, 0.25);
    const auto basis = compact_kernel(f, lambda, support);
    EXPECT_EQ(basis.size(), 3u);
    for (const auto& b : basis) {
        EXPECT_EQ(b.window, support);
        EXPECT_LE(verify_eigenpair(f, lambda, b), 1e-10);
    }
    EXPECT_THROW(compact_kernel(f, lambda, Window(-12, 0)), Error);
}

TEST(CompactKernel, MatchesIndependentSvdOracle) {
    // null space dimension from the singular values of an independently assembled map
    const Window w = Window::symmetric(8);
    const CoinField f = scenarios::edge_defect_model().assemble(w);
    const Window support(-1, 1), target(-2, 2);
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(2 * target.size(), 2 * support.size());
    for (long x = support.lo; x <= support.hi; ++x) {
        for (int c = 0; c < 2; ++c) {
            State e = State::zero(support);
            e(x, c) = 1.0;
            const State out = step(e, f, Boundary::padded);
            a.col(support.index(x, c)) = out.amp - kI * e.embedded(out.window).amp;
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a);
    const auto& sv = svd.singularValues();
    long dim = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) dim += sv[i] <= 1e-10 * sv[0];
    EXPECT_EQ(a.rows(), 10);
    EXPECT_EQ(a.cols(), 6);
    EXPECT_EQ(static_cast<long>(compact_kernel(f, kI, support).size()), dim);
    EXPECT_EQ(dim, 2);
}

TEST(Detect, EdgeDefectBothMethods) {
    const auto model = scenarios::edge_defect_model();
    for (DetectMethod method : {DetectMethod::compact_kernel, DetectMethod::spectral_localization}) {
        DetectConfig c = blind_config();
        c.method = method;
        const auto r = detect_edge_defects(model, Window::symmetric(30), c);
        EXPECT_TRUE(r.verdict);
        ASSERT_EQ(r.evidence.size(), 2u) << to_string(method);
        EXPECT_LE(std::abs(r.evidence[0].lambda - kI), 1e-10);
        EXPECT_LE(std::abs(r.evidence[1].lambda + kI), 1e-10);
        for (const auto& e : r.evidence) {
            EXPECT_EQ(e.kernel_dim, 2);
            EXPECT_EQ(e.x_lo, -1);
            EXPECT_EQ(e.x_hi, 1);
        }
    }
}

TEST(Detect, NoDefectWalksBothMethods) {
    for (const auto& model : {scenarios::vertex_model(), scenarios::bulk_model()}) {
        for (DetectMethod method : {DetectMethod::compact_kernel, DetectMethod::spectral_localization}) {
            DetectConfig c;
            c.method = method;
            const auto r = detect_edge_defects(model, Window::symmetric(30), c);
            EXPECT_FALSE(r.verdict);
            EXPECT_TRUE(r.evidence.empty());
        }
    }
}

TEST(Detect, KnownPhaseCandidatesAlone) {
    // a coarse grid still finds the defects through the known phases
    DetectConfig c;
    c.theta_step = 0.5;
    const auto r = detect_edge_defects(scenarios::edge_defect_model(), Window::symmetric(12), c);
    EXPECT_TRUE(r.verdict);
    EXPECT_EQ(r.evidence.size(), 2u);
}

TEST(Detect, BlindScanFindsUnknownPhase) {
    std::mt19937_64 gen(5);
    const auto bulk = ModelParams::make(0.55, 0.4, 1.3, 0.9);
    const double gp = admissible_gamma_prime(essential_band(bulk), gen, 0.1);
    const FieldModel m{bulk, DefectSpec({2}, 0.7, gp), {}, {}};
    const auto r = detect_edge_defects(m, Window::symmetric(12), blind_config());
    ASSERT_TRUE(r.verdict);
    const Complex plus = kI * std::polar(1.0, gp / 2), minus = -plus;
    bool found_plus = false, found_minus = false;
    for (const auto& e : r.evidence) {
        found_plus = found_plus || std::abs(e.lambda - plus) <= 1e-10;
        found_minus = found_minus || std::abs(e.lambda - minus) <= 1e-10;
        EXPECT_EQ(e.x_lo, 1);
        EXPECT_EQ(e.x_hi, 2);
    }
    EXPECT_TRUE(found_plus);
    EXPECT_TRUE(found_minus);
}

TEST(Detect, GridRespectsThresholdGuard) {
    // evaluate the scan grid the same way detection does and check its distance to thresholds
    std::mt19937_64 gen(6);
    std::uniform_real_distribution<double> u(0.05, 0.98), ph(0.0, kTwoPi);
    for (int i = 0; i < 10; ++i) {
        const auto bulk = ModelParams::make(u(gen), ph(gen), ph(gen), ph(gen));
        const FieldModel m{bulk, {}, {}, {}};
        DetectConfig c;
        c.theta_step = 0.05;
        c.support = Window(-2, 2);
        const auto r = detect_edge_defects(m, Window::symmetric(4), c);
        EXPECT_FALSE(r.verdict);
        EXPECT_GT(r.evaluations, 0u);
    }
    const auto band = essential_band(ModelParams::hadamard());
    const double radius = 0.05, step = 0.01;
    for (const Arc& arc : band.arcs) {
        const double usable = arc.length() - 2 * radius;
        for (double off = 0.5 * step; off < usable; off += step) {
            EXPECT_GT(band.distance_to_threshold(wrap_phase(arc.lo + radius + off)), radius);
        }
    }
}

TEST(Detect, WindowTooSmall) {
    EXPECT_THROW(detect_edge_defects(scenarios::edge_defect_model(), Window::symmetric(2)), Error);
    EXPECT_THROW(detect_edge_defects(FieldModel{ModelParams::make(0.0), {}, {}, {}}, Window::symmetric(5)), Error);
}

TEST(Detect, PhaseConditionPlacesBothEigenvaluesInBand) {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(0.05, 0.99), ph(0.0, kTwoPi);
    int checked = 0;
    while (checked < 100) {
        const auto bulk = ModelParams::make(u(gen), 0.0, 0.0, ph(gen));
        const auto band = essential_band(bulk);
        const double gp = ph(gen);
        const double half = wrap_phase((gp + kPi) / 2.0);
        if (!band.in_interior(half, 0.0) || band.distance_to_threshold(half) < 1e-9) continue;
        ++checked;
        const Complex plus = kI * std::polar(1.0, gp / 2), minus = -plus;
        // the +branch phase is (γ′+π)/2 itself, the −branch its translate by π
        EXPECT_LE(circular_distance(phase_of(plus), half), 1e-12);
        EXPECT_TRUE(band.in_interior(phase_of(plus), 0.0));
        EXPECT_TRUE(band.in_interior(phase_of(minus), 0.0));
    }
}

TEST(Detect, ThreadCountDoesNotChangeResult) {
    DetectConfig one = blind_config(), four = blind_config();
    one.threads = 1;
    four.threads = 4;
    one.theta_step = four.theta_step = 0.03;
    const auto a = detect_edge_defects(scenarios::edge_defect_model(), Window::symmetric(10), one);
    const auto b = detect_edge_defects(scenarios::edge_defect_model(), Window::symmetric(10), four);
    ASSERT_EQ(a.evidence.size(), b.evidence.size());
    for (std::size_t i = 0; i < a.evidence.size(); ++i) {
        EXPECT_EQ(a.evidence[i].lambda, b.evidence[i].lambda);
        EXPECT_EQ(a.evidence[i].kernel_dim, b.evidence[i].kernel_dim);
    }
    EXPECT_EQ(a.evaluations, b.evaluations);
}
