#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "support.hpp"

namespace sf = slowfast;
using sf::testing::hermite;
using sf::testing::sample;
using sf::testing::ScalarSpec;
using sf::testing::scalar_model;

namespace {

const std::vector<double> kX{0.5};
constexpr sf::PoissonMethod kBoth[] = {sf::PoissonMethod::Quadrature, sf::PoissonMethod::FiniteDifference};

sf::InvariantDensity default_density(const sf::SlowFastModel& m, const std::vector<double>& x = kX) {
    const std::size_t count = m.fast_space.kind == sf::FastSpaceKind::Torus ? 1024 : 1025;
    return sf::invariant_density_1d(m, x, sf::fast_grid(m, x, count, 1e-24));
}

double gk(const std::function<double(double)>& f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-14);
}

/// max over trusted nodes with |y| <= cap of |got - want(y)|.
double interior_error(const sf::CorrectorSolution& sol, const std::vector<double>& got,
                      const std::function<double(double)>& want, double cap = 1e300) {
    double worst = 0.0;
    for (std::size_t i = 0; i < sol.grid.size(); ++i) {
        const double y = sol.grid.node(i);
        if (!sol.trusted[i] || std::abs(y) > cap) continue;
        worst = std::max(worst, std::abs(got[i] - want(y)));
    }
    return worst;
}

sf::SlowFastModel regime_one_ou(sf::testing::Scalar b) {
    ScalarSpec s;
    s.b = std::move(b);
    s.scaling = sf::RegimeScaling::regime1(0.0);
    return scalar_model(s);
}

}  // namespace

TEST(Poisson, OrnsteinUhlenbeckHermiteOracle) {
    const auto m = scalar_model({});
    const auto dens = default_density(m);
    for (const auto method : kBoth) {
        for (int k = 1; k <= 3; ++k) {
            const auto sol = sf::solve_poisson(method, m, kX, {sample(dens.grid, [k](double y) { return hermite(k, y); })}, dens);
            const double scale = 2.0 / k;
            EXPECT_TRUE(sol.certified()) << to_string(method) << " k=" << k << " residual " << sol.residual_sup;
            EXPECT_LT(interior_error(sol, sol.values[0], [&](double y) { return scale * hermite(k, y); }), 1e-5)
                << to_string(method) << " k=" << k;
            EXPECT_LT(interior_error(sol, sol.dy[0], [&](double y) { return scale * k * hermite(k - 1, y); }), 1e-5)
                << to_string(method) << " k=" << k;
        }
    }
}

TEST(Poisson, LinearRightHandSideGivesTwiceIdentity) {
    const auto m = scalar_model({});
    const auto dens = default_density(m);
    const auto sol = sf::solve_poisson_quadrature_1d(m, kX, {sample(dens.grid, [](double y) { return y; })}, dens);
    EXPECT_LT(interior_error(sol, sol.values[0], [](double y) { return 2 * y; }), 1e-6);
    EXPECT_LT(interior_error(sol, sol.dy[0], [](double) { return 2.0; }), 1e-6);
}

TEST(Poisson, ZeroRightHandSideGivesZero) {
    const auto m = scalar_model({});
    const auto dens = default_density(m);
    for (const auto method : kBoth) {
        const auto sol = sf::solve_poisson(method, m, kX, {std::vector<double>(dens.grid.size(), 0.0)}, dens);
        for (std::size_t i = 0; i < dens.grid.size(); ++i) {
            EXPECT_EQ(sol.values[0][i], 0.0);
            EXPECT_EQ(sol.dy[0][i], 0.0);
        }
    }
}

TEST(Poisson, TorusFourierOracle) {
    ScalarSpec s;
    s.f = sf::testing::constant(0.0);
    s.scaling = sf::RegimeScaling::regime1(0.0);
    s.kind = sf::FastSpaceKind::Torus;
    const auto m = scalar_model(s);
    const auto dens = default_density(m);
    for (const auto method : kBoth) {
        const auto sol = sf::solve_poisson(method, m, kX, {sample(dens.grid, [](double y) { return std::sin(2 * M_PI * y); })}, dens);
        EXPECT_LT(interior_error(sol, sol.values[0], [](double y) { return std::sin(2 * M_PI * y) / (2 * M_PI * M_PI); }), 1e-6)
            << to_string(method);
    }
}

TEST(Poisson, FredholmViolationRejected) {
    const auto m = scalar_model({});
    const auto dens = default_density(m);
    try {
        (void)sf::solve_poisson_quadrature_1d(m, kX, {sample(dens.grid, [](double y) { return 1.0 + y; })}, dens);
        FAIL() << "expected FredholmViolation";
    } catch (const sf::Error& e) {
        EXPECT_EQ(e.code(), sf::ErrorCode::FredholmViolation);
    }
}

TEST(CellProblem, UncenteredDriftRejected) {
    const auto m = regime_one_ou([](double, double y) { return 0.3 + y; });
    const auto dens = default_density(m);
    try {
        (void)sf::cell_chi(m, kX, dens);
        FAIL() << "expected CenteringViolation";
    } catch (const sf::Error& e) {
        EXPECT_EQ(e.code(), sf::ErrorCode::CenteringViolation);
    }
}

TEST(CellProblem, OddDriftGivesEvenDerivative) {
    const auto m = regime_one_ou([](double, double y) { return std::sin(y); });
    const auto dens = default_density(m);
    const auto chi = sf::cell_chi(m, kX, dens);
    EXPECT_TRUE(chi.certified());
    const std::size_t n = dens.grid.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!chi.trusted[i] || std::abs(dens.grid.node(i)) > 8) continue;
        EXPECT_NEAR(chi.dy[0][i], chi.dy[0][n - 1 - i], 1e-8);
    }
}

TEST(CellProblem, ExampleTwoClosedForm) {
    // 1 + chi'(y) = exp(Q/D) / Zhat with Zhat = int_0^1 exp(Q/D) = I0(1).
    const auto m = sf::example2();
    sf::RateIngredients ing(m);
    const auto p = ing.at(kX);
    ASSERT_TRUE(p->chi.has_value());
    const double i0 = sf::testing::bessel_i0(1.0);
    EXPECT_LT(interior_error(*p->chi, p->chi->dy[0], [&](double y) { return std::exp(std::cos(2 * M_PI * y)) / i0 - 1.0; }),
              1e-5);
}

TEST(Corrector, ExampleOneCenteredClosedForm) {
    // Phi' = -2 e^{y^2/2} int_{-inf}^y (b - lambdabar) e^{-z^2/2} dz with b = cos x cos y.
    const auto m = sf::example1();
    sf::RateIngredients ing(m);
    const auto p = ing.at(kX);
    const double cx = std::cos(kX[0]), lbar = std::exp(-0.5) * cx;
    auto centred = [&](double z) { return (cx * std::cos(z) - lbar) * std::exp(-0.5 * z * z); };
    auto oracle = [&](double y) {
        // integrate over the shorter tail; the full-line integral vanishes
        return y <= 0 ? -2.0 * std::exp(0.5 * y * y) * gk(centred, -40.0, y)
                      : 2.0 * std::exp(0.5 * y * y) * gk(centred, y, 40.0);
    };
    EXPECT_LT(interior_error(p->phi, p->phi.dy[0], oracle, 6.0), 1e-5);
    EXPECT_NEAR(p->lambda_bar[0], lbar, 1e-10);
}

TEST(Corrector, ExampleTwoThetaOracle) {
    // Phi' = (V'(x)/D) Theta(y), Theta(y) = e^{Q}[(y - F(y)/Z)/Zhat - c0], F(y) = int_0^y e^{-Q}.
    const auto m = sf::example2();
    sf::RateIngredients ing(m);
    const auto p = ing.at(kX);
    auto Q = [](double y) { return std::cos(2 * M_PI * y); };
    const double Z = gk([&](double z) { return std::exp(-Q(z)); }, 0.0, 1.0);
    const double Zh = gk([&](double z) { return std::exp(Q(z)); }, 0.0, 1.0);
    auto inner = [&](double y) { return (y - gk([&](double z) { return std::exp(-Q(z)); }, 0.0, y) / Z) / Zh; };
    const double c0 = gk([&](double y) { return std::exp(Q(y)) * inner(y); }, 0.0, 1.0) / Zh;
    auto theta = [&](double y) { return std::exp(Q(y)) * (inner(y) - c0); };
    const double vprime = kX[0];
    double worst = 0.0;
    for (std::size_t i = 0; i < p->phi.grid.size(); i += 8) {
        const double y = p->phi.grid.node(i);
        worst = std::max(worst, std::abs(p->phi.dy[0][i] - vprime * theta(y)));
    }
    EXPECT_LT(worst, 1e-4);
}

TEST(Corrector, ZeroFluctuationGivesZero) {
    ScalarSpec s;
    s.c = [](double x, double) { return -x; };
    const auto m = scalar_model(s);
    sf::RateIngredients ing(m);
    const auto p = ing.at(kX);
    for (const double v : p->phi.values[0]) EXPECT_EQ(v, 0.0);
}

TEST(Poisson, CrossSolverAgreementOnBuiltins) {
    for (const auto& m : {sf::example1(), sf::example2(), sf::example3()}) {
        sf::PipelineOptions q, fd;
        fd.method = sf::PoissonMethod::FiniteDifference;
        sf::RateIngredients a(m, q), b(m, fd);
        const auto pa = a.at(m.x0), pb = b.at(m.x0);
        double worst = 0.0;
        for (std::size_t i = 0; i < pa->phi.grid.size(); ++i) {
            if (!pa->phi.trusted[i] || !pb->phi.trusted[i]) continue;
            worst = std::max(worst, std::abs(pa->phi.values[0][i] - pb->phi.values[0][i]));
            worst = std::max(worst, std::abs(pa->phi.dy[0][i] - pb->phi.dy[0][i]));
            if (pa->chi) worst = std::max(worst, std::abs(pa->chi->dy[0][i] - pb->chi->dy[0][i]));
        }
        EXPECT_LT(worst, 1e-4) << m.name;
        EXPECT_TRUE(pa->phi.certified() && pb->phi.certified()) << m.name;
    }
}

TEST(Poisson, Linearity) {
    const auto m = scalar_model({});
    const auto dens = default_density(m);
    const auto F1 = sample(dens.grid, [](double y) { return std::sin(y); });
    const auto F2 = sample(dens.grid, [](double y) { return y * y - 1.0; });
    std::vector<double> F3(F1.size());
    for (std::size_t i = 0; i < F1.size(); ++i) F3[i] = 2.5 * F1[i] - 0.75 * F2[i];
    for (const auto method : kBoth) {
        const auto s = sf::solve_poisson(method, m, kX, {F1, F2, F3}, dens);
        double worst = 0.0;
        for (std::size_t i = 0; i < F1.size(); ++i)
            worst = std::max(worst, std::abs(s.values[2][i] - (2.5 * s.values[0][i] - 0.75 * s.values[1][i])));
        EXPECT_LT(worst, 1e-9) << to_string(method);
    }
}

namespace {

/// max |u| over a symmetric truncation of half-width L for centred data F.
double max_solution(const sf::SlowFastModel& m, double L, const std::function<double(double)>& f) {
    const auto dens = sf::invariant_density_1d(m, kX, sf::Grid1D::symmetric(L, 4097));
    std::vector<double> F = sample(dens.grid, f);
    const double mean = dens.integrate(F);
    for (double& v : F) v -= mean;
    const auto sol = sf::solve_poisson_quadrature_1d(m, kX, {F}, dens);
    double mx = 0.0;
    for (const double v : sol.values[0]) mx = std::max(mx, std::abs(v));
    return mx;
}

}  // namespace

TEST(Poisson, SolutionGrowthOddBoundedData) {
    // Bounded data with r = 1: log-log slope of max |u| in L stays below 0 + 0.2.
    const auto m = scalar_model({});
    auto f = [](double y) { return std::sin(y); };
    const double slope = std::log(max_solution(m, 24.0, f) / max_solution(m, 12.0, f)) / std::log(2.0);
    EXPECT_LE(slope, 0.2);
}

TEST(Poisson, SolutionGrowthIsLogarithmic) {
    // cos(y) - E cos(Y) keeps a nonzero tail average, so u ~ 2 e^{-1/2} log|y|: each doubling
    // of L adds the same increment 2 e^{-1/2} log 2 instead of a growing one.
    const auto m = scalar_model({});
    auto f = [](double y) { return std::cos(y); };
    const double u12 = max_solution(m, 12.0, f), u24 = max_solution(m, 24.0, f), u48 = max_solution(m, 48.0, f);
    const double expected = 2.0 * std::exp(-0.5) * std::log(2.0);
    EXPECT_NEAR(u24 - u12, expected, 0.1 * expected);
    EXPECT_NEAR(u48 - u24, expected, 0.1 * expected);
}
