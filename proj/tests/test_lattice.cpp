#include "qws/lattice.hpp"
#include "qws/scenarios.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <random>

using namespace qws;

namespace {

constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

void expect_near(Complex a, Complex b, double tol) {
    EXPECT_NEAR(std::abs(a - b), 0.0, tol) << a << " vs " << b;
}

void expect_coin(const CoinMatrix& m, std::array<Complex, 4> want, double tol = 1e-15) {
    for (int k = 0; k < 4; ++k) expect_near(m(k / 2, k % 2), want[static_cast<std::size_t>(k)], tol);
}

// Reference step written straight from (Uψ)(x) = P(x+1)ψ(x+1) + Q(x−1)ψ(x−1),
// with P = first row of C, Q = second row, on a map of sites.
std::map<long, std::array<Complex, 2>> reference_step(const std::map<long, std::array<Complex, 2>>& psi,
                                                      const std::function<CoinMatrix(long)>& coin) {
    std::map<long, std::array<Complex, 2>> out;
    long lo = psi.begin()->first - 1, hi = psi.rbegin()->first + 1;
    auto get = [&](long x) {
        auto it = psi.find(x);
        return it == psi.end() ? std::array<Complex, 2>{} : it->second;
    };
    for (long x = lo; x <= hi; ++x) {
        const auto r = get(x + 1);
        const auto l = get(x - 1);
        const CoinMatrix cr = coin(x + 1), cl = coin(x - 1);
        out[x] = {cr(0, 0) * r[0] + cr(0, 1) * r[1], cl(1, 0) * l[0] + cl(1, 1) * l[1]};
    }
    return out;
}

State random_state(const Window& w, std::mt19937_64& gen) {
    std::normal_distribution<double> n;
    State s = State::zero(w);
    for (Eigen::Index i = 0; i < s.amp.size(); ++i) s.amp[i] = Complex(n(gen), n(gen));
    s.amp.normalize();
    return s;
}

}  // namespace

TEST(Coin, HadamardBulk) {
    expect_coin(make_coin_c0(ModelParams::hadamard()), {kInvSqrt2, kInvSqrt2, -kInvSqrt2, kInvSqrt2});
}

TEST(Coin, PEqualsOneIsIdentity) {
    expect_coin(make_coin_c0(ModelParams::make(1.0)), {1.0, 0.0, 0.0, 1.0});
}

TEST(Coin, PZeroReducesToDefectCoin) {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> ph(0.0, kTwoPi);
    for (int i = 0; i < 20; ++i) {
        const double bp = ph(gen), gp = ph(gen), a = ph(gen);
        const CoinMatrix d = make_defect_coin(bp, gp);
        const CoinMatrix c = make_coin_c0(ModelParams::make(0.0, a, bp, gp));
        EXPECT_LE((c - d).cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(Coin, DefectCoinExamples) {
    expect_coin(make_defect_coin(0.0, 0.0), {0.0, 1.0, -1.0, 0.0});
    expect_coin(make_defect_coin(kPi / 2, 0.0), {0.0, kI, kI, 0.0});
}

TEST(Coin, RandomCoinsAreUnitary) {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.0, 1.0), ph(-10.0, 10.0);
    for (int i = 0; i < 200; ++i) {
        const auto m = ModelParams::make(u(gen), ph(gen), ph(gen), ph(gen));
        EXPECT_NEAR(m.p * m.p + m.q * m.q, 1.0, 1e-14);
        for (double phase : {m.alpha, m.beta, m.gamma}) {
            EXPECT_GE(phase, 0.0);
            EXPECT_LT(phase, kTwoPi);
        }
        EXPECT_LE(unitarity_defect(make_coin_c0(m)), 1e-12);
        const CoinMatrix d = make_defect_coin(wrap_phase(ph(gen)), wrap_phase(ph(gen)));
        EXPECT_LE(unitarity_defect(d), 1e-12);
        EXPECT_EQ(d(0, 0), Complex{});
        EXPECT_EQ(d(1, 1), Complex{});
    }
}

TEST(Params, RangeErrorNamesField) {
    try {
        ModelParams::make(1.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::RangeError);
        EXPECT_EQ(e.path(), "model.p");
    }
}

TEST(Window, Invariants) {
    EXPECT_THROW(Window(0, 0), Error);
    EXPECT_THROW(Window(3, 1), Error);
    EXPECT_EQ(Window::symmetric(60).size(), 121);
}

TEST(DefectSpecTest, SitesAndOrdering) {
    const DefectSpec d({1, 0});
    EXPECT_EQ(d.centers, (std::vector<long>{0, 1}));
    EXPECT_EQ(d.sites(), (std::vector<long>{-1, 0, 1}));
    EXPECT_EQ(d.lowest_site(), -1);
    EXPECT_EQ(d.highest_site(), 1);
    EXPECT_THROW(DefectSpec({2, 2}), Error);
}

TEST(Assemble, EdgeDefectScenario) {
    const Window w = Window::symmetric(10);
    const CoinField f = scenarios::edge_defect_model().assemble(w);
    const CoinMatrix c1 = make_defect_coin(0, 0), c0 = make_coin_c0(ModelParams::hadamard());
    for (long x = w.lo; x <= w.hi; ++x) {
        const CoinMatrix& want = (x >= -1 && x <= 1) ? c1 : c0;
        EXPECT_EQ(f.at(x), want) << x;
    }
}

TEST(Assemble, NoDefectsIsConstant) {
    const auto m = ModelParams::make(0.3, 1.0, 2.0, 3.0);
    const CoinField f = assemble_coin_field(m, {}, {}, Window::symmetric(5));
    for (const auto& c : f.coins) EXPECT_EQ(c, make_coin_c0(m));
}

TEST(Assemble, DefectsMustBeInterior) {
    EXPECT_THROW(assemble_coin_field(ModelParams::hadamard(), DefectSpec({-4}), {}, Window::symmetric(5)), Error);
    EXPECT_THROW(assemble_coin_field(ModelParams::hadamard(), DefectSpec({5}), {}, Window::symmetric(5)), Error);
    EXPECT_NO_THROW(assemble_coin_field(ModelParams::hadamard(), DefectSpec({-3, 4}), {}, Window::symmetric(5)));
}

TEST(Assemble, EnvelopeSeedSeven) {
    const auto pert = PerturbationSpec::exponential(0.1, 1.0, 0.1, 7);
    const auto c0 = make_coin_c0(ModelParams::hadamard());
    const CoinField f = assemble_coin_field(ModelParams::hadamard(), {}, pert, Window::symmetric(60));
    for (long x = -60; x <= 60; ++x) {
        EXPECT_LE((f.at(x) - c0).cwiseAbs().maxCoeff(), 0.1 * std::exp(-std::sqrt(1.0 + double(x * x))));
    }
}

TEST(Assemble, EnvelopeProperty100Seeds) {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const double delta = 0.05 + 0.3 * u(gen);
        const auto m = ModelParams::make(delta + (1.0 - delta) * u(gen), 7 * u(gen), 7 * u(gen), 7 * u(gen));
        const auto pert = PerturbationSpec::exponential(0.05 + 2.0 * u(gen), 0.2 + u(gen), delta, seed);
        const CoinField f = assemble_coin_field(m, {}, pert, Window::symmetric(25));
        const CoinMatrix c0 = make_coin_c0(m);
        for (long x = -25; x <= 25; ++x) {
            EXPECT_LE((f.at(x) - c0).cwiseAbs().maxCoeff(), pert.envelope(x)) << seed << " " << x;
            EXPECT_GE(std::abs(f.at(x)(0, 0)), delta * (1 - 1e-12));
            EXPECT_LE(unitarity_defect(f.at(x)), 1e-12);
        }
    }
}

TEST(Assemble, PerturbationIsDeterministicAndWindowIndependent) {
    const FieldModel m{ModelParams::hadamard(), {}, PerturbationSpec::exponential(0.5, 0.3, 0.1, 99), {}};
    const CoinField a = m.assemble(Window::symmetric(10));
    const CoinField b = m.assemble(Window(-30, 15));
    for (long x = -10; x <= 10; ++x) EXPECT_EQ(a.at(x), b.at(x));
    const FieldModel other{ModelParams::hadamard(), {}, PerturbationSpec::exponential(0.5, 0.3, 0.1, 100), {}};
    EXPECT_NE(a.at(0), other.assemble(Window::symmetric(10)).at(0));
}

TEST(Assemble, RejectsPBelowDelta) {
    EXPECT_THROW(assemble_coin_field(ModelParams::make(0.05), {}, PerturbationSpec::exponential(0.1, 1, 0.1, 0),
                                     Window::symmetric(5)),
                 Error);
}

TEST(Step, HadamardDeltaOneStep) {
    const Window w = Window::symmetric(3);
    const CoinField f = CoinField::constant(w, make_coin_c0(ModelParams::hadamard()));
    const State out = step(State::delta(w, 0, 1.0, 0.0), f, Boundary::padded);
    EXPECT_EQ(out.window, w.expanded(1));
    expect_near(out(-1, 0), kInvSqrt2, 1e-15);
    expect_near(out(-1, 1), 0.0, 1e-15);
    expect_near(out(1, 0), 0.0, 1e-15);
    expect_near(out(1, 1), -kInvSqrt2, 1e-15);
    EXPECT_NEAR(out.norm2(), 1.0, 1e-15);
}

TEST(Step, IdentityCoinIsPureShift) {
    const Window w = Window::symmetric(5);
    const CoinField f = CoinField::constant(w, CoinMatrix::Identity());
    std::mt19937_64 gen(1);
    const State s = random_state(Window(-2, 2), gen);
    const State out = step(s, f, Boundary::padded);
    for (long x = -2; x <= 2; ++x) {
        EXPECT_EQ(out(x - 1, 0), s(x, 0));
        EXPECT_EQ(out(x + 1, 1), s(x, 1));
    }
}

TEST(Step, MatchesReferenceOnRandomField) {
    std::mt19937_64 gen(5);
    const Window w = Window::symmetric(12);
    const FieldModel m{ModelParams::make(0.4, 1, 2, 3), DefectSpec({-2, 4}, 0.7, 1.9),
                       PerturbationSpec::exponential(0.8, 0.2, 0.1, 3), {}};
    const CoinField f = m.assemble(w);
    const State s = random_state(Window(-8, 8), gen);
    std::map<long, std::array<Complex, 2>> psi;
    for (long x = -8; x <= 8; ++x) psi[x] = {s(x, 0), s(x, 1)};
    const auto ref = reference_step(psi, [&](long x) { return f.at(x); });
    const State out = step(s, f, Boundary::padded);
    for (const auto& [x, v] : ref) {
        expect_near(out(x, 0), v[0], 1e-15);
        expect_near(out(x, 1), v[1], 1e-15);
    }
}

TEST(Step, NormConservation) {
    std::mt19937_64 gen(8);
    const Window w = Window::symmetric(120);
    const FieldModel m{ModelParams::make(0.6, 0.2, 0.3, 0.4), DefectSpec({0, 3}, 1.0, 2.0),
                       PerturbationSpec::exponential(0.9, 0.3, 0.1, 1), {}};
    const CoinField f = m.assemble(w);
    State s = random_state(Window(-5, 5), gen);
    for (int t = 0; t < 100; ++t) {
        const double before = s.norm2();
        s = step(s, f, Boundary::padded);
        EXPECT_NEAR(s.norm2() / before, 1.0, 1e-12);
    }
    EXPECT_NEAR(s.norm2(), 1.0, 1e-10);

    const CoinField ring = m.assemble(Window::symmetric(20));
    State p = random_state(Window::symmetric(20), gen);
    for (int t = 0; t < 100; ++t) p = step(p, ring, Boundary::periodic);
    EXPECT_NEAR(p.norm2(), 1.0, 1e-10);
}

TEST(Step, TruncateNeverIncreasesNorm) {
    std::mt19937_64 gen(9);
    const Window w = Window::symmetric(6);
    const CoinField f = scenarios::edge_defect_model().assemble(w);
    State s = random_state(w, gen);
    for (int t = 0; t < 50; ++t) {
        const double before = s.norm2();
        s = step(s, f, Boundary::truncate);
        EXPECT_LE(s.norm2(), before * (1 + 1e-14));
    }
}

TEST(Step, WindowMismatch) {
    const CoinField f = CoinField::constant(Window::symmetric(3), CoinMatrix::Identity());
    EXPECT_THROW(step(State::zero(Window::symmetric(4)), f, Boundary::padded), Error);
    EXPECT_THROW(step(State::zero(Window::symmetric(2)), f, Boundary::periodic), Error);
}

TEST(Step, TranslationCovariance) {
    std::mt19937_64 gen(13);
    const Window w = Window::symmetric(20);
    const CoinField f = CoinField::constant(w, make_coin_c0(ModelParams::make(0.35, 0.5, 1.5, 2.5)));
    const State s = random_state(Window(-3, 3), gen);
    for (long y = -5; y <= 5; ++y) {
        const State a = step(translate(s, y), f, Boundary::padded);
        const State b = translate(step(s, f, Boundary::padded), y);
        ASSERT_EQ(a.window, b.window);
        EXPECT_LE((a.amp - b.amp).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(Translate, GroupLaw) {
    std::mt19937_64 gen(2);
    const State s = random_state(Window(-2, 3), gen);
    EXPECT_EQ(translate(s, 0).window, s.window);
    const State a = translate(translate(s, 4), -7), b = translate(s, -3);
    EXPECT_EQ(a.window, b.window);
    EXPECT_EQ(a.amp, b.amp);
    const State d = translate(State::delta(Window(0, 1), 0, 1.0, 0.0), 3);
    EXPECT_EQ(d.value(3, 0), Complex(1.0));
    EXPECT_NEAR(d.norm2(), 1.0, 0.0);
}

TEST(Evolve, StepsZeroAndCoverage) {
    const Window w = Window::symmetric(10);
    const CoinField f = scenarios::edge_defect_model().assemble(w);
    const State psi0 = scenarios::initial_state(w);
    const auto traj = evolve(psi0, f, 0, Boundary::padded);
    ASSERT_EQ(traj.size(), 1u);
    EXPECT_EQ(traj[0].amp, psi0.amp);
    EXPECT_NO_THROW(evolve(psi0, f, 9, Boundary::padded));
    EXPECT_THROW(evolve(psi0, f, 10, Boundary::padded), Error);
}

TEST(Evolve, ScenarioInitialDistribution) {
    const auto dist = position_distribution(scenarios::initial_state(Window::symmetric(3)));
    double total = 0.0;
    for (const auto& [x, p] : dist) {
        total += p;
        EXPECT_NEAR(p, (x >= -1 && x <= 1) ? 1.0 / 3.0 : 0.0, 1e-15);
    }
    EXPECT_NEAR(total, 1.0, 1e-15);
}

TEST(Evolve, EdgeDefectWalkStaysNearOrigin) {
    const Window w = Window::symmetric(110);
    const auto traj = evolve(scenarios::initial_state(w), scenarios::edge_defect_model().assemble(w), 100,
                             Boundary::padded);
    double near = 0.0, total = 0.0;
    for (const auto& [x, p] : position_distribution(traj.back())) {
        total += p;
        if (std::abs(x) <= 3) near += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-10);
    EXPECT_GE(near, 0.1);
}

TEST(Distribution, ZeroAndDelta) {
    for (const auto& [x, p] : position_distribution(State::zero(Window(0, 4)))) EXPECT_EQ(p, 0.0);
    const auto d = position_distribution(State::delta(Window(-1, 1), 0, kInvSqrt2, Complex(0, kInvSqrt2)));
    EXPECT_NEAR(d.at(0), 1.0, 1e-15);
    EXPECT_EQ(d.at(1), 0.0);
}
