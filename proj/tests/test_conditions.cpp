#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

namespace sf = slowfast;
using sf::testing::ScalarSpec;
using sf::testing::scalar_model;

namespace {

sf::GrowthErgodicityParams exponents(double qb, double qc, double qs, double r) {
    sf::GrowthErgodicityParams p;
    p.q_b = qb;
    p.q_c = qc;
    p.q_sigma = qs;
    p.r = r;
    return p;
}

const sf::RegimeScaling kR1 = sf::RegimeScaling::regime1(0.0);
const sf::RegimeScaling kR2 = sf::RegimeScaling::regime2(1.0, 0.0);

bool tight(double qb, double qc, double qs, double r, const sf::RegimeScaling& reg) {
    return sf::check_tightness(exponents(qb, qc, qs, r), reg).passed();
}

sf::ScanBox box_around(double x, double radius = 50.0) {
    sf::ScanBox b;
    b.x_lo = {x - 1.0};
    b.x_hi = {x + 1.0};
    b.y_radius = radius;
    return b;
}

}  // namespace

TEST(Tightness, BoundedCoefficientsRegimeOneThresholdIsFourFifths) {
    EXPECT_TRUE(tight(0, 0, 0, 0.8, kR1));
    EXPECT_FALSE(tight(0, 0, 0, 0.79, kR1));
    EXPECT_FALSE(tight(0, 0, 0, 0.7999999, kR1));
}

TEST(Tightness, BoundedCoefficientsRegimeTwoThresholdIsThreeQuarters) {
    EXPECT_TRUE(tight(0, 0, 0, 0.75, kR2));
    EXPECT_FALSE(tight(0, 0, 0, 0.74, kR2));
}

TEST(Tightness, UnitRateReducesToSimpleInequalities) {
    EXPECT_TRUE(tight(0.5, 0, 0.25, 1, kR2));
    EXPECT_FALSE(tight(0.6, 0, 0, 1, kR2));
    // q_b <= 1/2 and 2 q_sigma + q_b <= 1 on a lattice of exponents.
    for (int i = 0; i <= 20; ++i)
        for (int k = 0; k <= 20; ++k) {
            const double qb = i / 20.0, qs = k / 20.0;
            const bool expected = 2 * i <= 20 && 2 * k + i <= 20;
            EXPECT_EQ(tight(qb, 0, qs, 1, kR2), expected) << "q_b=" << qb << " q_sigma=" << qs;
        }
}

TEST(Tightness, FailureCarriesWitness) {
    const auto rep = sf::check_tightness(exponents(0.6, 0, 0, 1), kR2);
    ASSERT_EQ(rep.verdict("tightness.first_group"), sf::Verdict::Fail);
    for (const auto& e : rep.entries) {
        if (e.verdict == sf::Verdict::Fail) {
            EXPECT_FALSE(e.witness.empty());
        }
    }
}

TEST(Tightness, MonotoneInRateAndExponents) {
    // Raising r never breaks a passing configuration; raising an exponent never repairs a failing one.
    const std::vector<double> grid = {0.0, 0.1, 0.25, 0.4, 0.5};
    for (const auto* reg : {&kR1, &kR2}) {
        for (double qb : grid) {
            for (double qs : grid) {
                for (int ri = 50; ri < 100; ++ri) {
                    const double r = ri / 100.0;
                    if (tight(qb, 0, qs, r, *reg)) {
                        EXPECT_TRUE(tight(qb, 0, qs, r + 0.01, *reg));
                    } else {
                        EXPECT_FALSE(tight(qb + 0.05, 0, qs, r, *reg));
                        EXPECT_FALSE(tight(qb, 0, qs + 0.05, r, *reg));
                    }
                }
            }
        }
    }
}

TEST(Recurrence, OrnsteinUhlenbeckPasses) {
    auto m = scalar_model({});
    m.params.Gamma = 0.25;
    m.params.R_rec = 1.0;
    const auto rep = sf::check_recurrence_scan(m, 20.0, {{0.0}, {1.0}});
    EXPECT_EQ(rep.verdict("recurrence"), sf::Verdict::Pass);
}

TEST(Recurrence, OutwardDriftFailsWithWitness) {
    ScalarSpec s;
    s.f = [](double, double y) { return y; };
    auto m = scalar_model(s);
    m.params.Gamma = 0.25;
    m.params.R_rec = 1.0;
    const auto rep = sf::check_recurrence_scan(m, 20.0, {{0.0}});
    ASSERT_EQ(rep.verdict("recurrence"), sf::Verdict::Fail);
    EXPECT_NE(rep.entries.front().witness.find("drift.y"), std::string::npos);
}

TEST(Recurrence, CirOnHalfLinePasses) {
    const auto m = sf::example3();
    const auto rep = sf::check_recurrence_scan(m, 20.0, {{-1.0}, {0.5}, {2.0}});
    EXPECT_EQ(rep.verdict("recurrence"), sf::Verdict::Pass);
}

TEST(Recurrence, EmptyProbeSetRejected) {
    const auto m = scalar_model({});
    try {
        (void)sf::check_recurrence_scan(m, 20.0, {});
        FAIL() << "expected EmptyProbeSet";
    } catch (const sf::Error& e) {
        EXPECT_EQ(e.code(), sf::ErrorCode::EmptyProbeSet);
    }
}

TEST(GrowthScan, BoundedTrigonometricDriftPasses) {
    ScalarSpec s;
    s.b = [](double x, double y) { return std::sin(y) * std::cos(x); };
    auto m = scalar_model(s);
    const auto rep = sf::check_growth_scan(m, box_around(0.0));
    EXPECT_TRUE(rep.passed()) << rep.to_key_value();
}

TEST(GrowthScan, LinearDiffusionWithZeroExponentFails) {
    ScalarSpec s;
    s.sigma = [](double, double y) { return 1.0 + std::abs(y); };
    auto m = scalar_model(s);
    const auto rep = sf::check_growth_scan(m, box_around(0.0));
    EXPECT_EQ(rep.verdict("growth.sigma"), sf::Verdict::Fail);
}

TEST(GrowthScan, LinearDriftWithUnitExponentPasses) {
    ScalarSpec s;
    s.b = [](double, double y) { return y; };
    auto m = scalar_model(s);
    m.params.q_b = 1.0;
    EXPECT_EQ(sf::check_growth_scan(m, box_around(0.0)).verdict("growth.b"), sf::Verdict::Pass);
    m.params.q_b = 0.5;
    EXPECT_EQ(sf::check_growth_scan(m, box_around(0.0)).verdict("growth.b"), sf::Verdict::Fail);
}

TEST(GrowthScan, DegenerateBoxRejected) {
    const auto m = scalar_model({});
    try {
        (void)sf::check_growth_scan(m, box_around(0.0, 0.5));
        FAIL() << "expected DegenerateScan";
    } catch (const sf::Error& e) {
        EXPECT_EQ(e.code(), sf::ErrorCode::DegenerateScan);
    }
}

TEST(LimitConstants, PowerFamilies) {
    using sf::ScalingFamily;
    EXPECT_EQ(sf::limit_constants_from_family(sf::RegimeScaling::regime1(0.0, ScalingFamily{1.0, 1.25, 0.25})).j, 1.0);
    EXPECT_EQ(sf::limit_constants_from_family(sf::RegimeScaling::regime1(0.0, ScalingFamily{2.0, 2.0, 0.25})).j, 0.0);
    try {
        (void)sf::limit_constants_from_family(sf::RegimeScaling::regime1(0.0, ScalingFamily{1.0, 1.1, 0.1}));
        FAIL() << "expected DivergentLimit";
    } catch (const sf::Error& e) {
        EXPECT_EQ(e.code(), sf::ErrorCode::DivergentLimit);
    }
    const auto r2 = sf::limit_constants_from_family(sf::RegimeScaling::regime2(0.5, 0.0, ScalingFamily{2.0, 1.0, 0.25}));
    EXPECT_EQ(r2.j, 0.0);
    EXPECT_EQ(r2.gamma, 0.5);
}

TEST(LimitConstants, AgreeWithDirectRatioAtSmallEpsilon) {
    // (delta/eps)/(sqrt(eps) h) evaluated along the family approaches the closed-form limit.
    const std::vector<sf::ScalingFamily> fams = {{1.0, 1.25, 0.25}, {3.0, 1.25, 0.25}, {2.0, 2.0, 0.25}, {1.0, 1.5, 0.1}};
    for (const auto& fam : fams) {
        const double j = sf::limit_constants_from_family(sf::RegimeScaling::regime1(0.0, fam)).j;
        auto ratio = [&](double eps) { return (fam.delta(eps) / eps) / (std::sqrt(eps) * fam.h(eps)); };
        EXPECT_NEAR(ratio(1e-80), j, 1e-6);
        EXPECT_LE(std::abs(ratio(1e-12) - j), std::abs(ratio(1e-4) - j) + 1e-12);
    }
}

TEST(EffectiveDrift, RegimeTwoScalesByGamma) {
    ScalarSpec s;
    s.f = [](double, double y) { return -y; };
    s.g = [](double x, double) { return x; };
    s.tau1 = sf::testing::constant(0.5);
    s.tau2 = sf::testing::constant(1.0);
    s.scaling = sf::RegimeScaling::regime2(2.0, 0.0);
    const auto m2 = scalar_model(s);
    const double x[1] = {0.3}, y[1] = {1.5};
    EXPECT_DOUBLE_EQ(sf::effective_fast_drift(m2, x, y)[0], 2.0 * -1.5 + 0.3);
    EXPECT_DOUBLE_EQ(sf::effective_fast_diffusion(m2, x, y)[0], 2.0 * 1.25);
    s.scaling = sf::RegimeScaling::regime1(0.0);
    const auto m1 = scalar_model(s);
    EXPECT_DOUBLE_EQ(sf::effective_fast_drift(m1, x, y)[0], -1.5);
    EXPECT_DOUBLE_EQ(sf::effective_fast_diffusion(m1, x, y)[0], 1.25);
}

TEST(Builtins, EachPassesItsOwnConditions) {
    for (const auto& m : {sf::example1(), sf::example2(), sf::example3()}) {
        const double x = m.x0[0];
        const auto box = box_around(x);
        const auto rep = sf::validate_model(m, {{x - 1.0}, {x}, {x + 1.0}}, std::max(10.0, 2 * m.params.R_rec + 1), box);
        EXPECT_TRUE(rep.passed()) << m.name << "\n" << rep.to_key_value();
    }
}

TEST(Builtins, ExampleThreeFlagsDegenerateDiffusion) {
    const auto m = sf::example3();
    const auto rep = sf::validate_model(m, {{0.5}}, 10.0, box_around(0.5));
    EXPECT_EQ(rep.verdict("ellipticity"), sf::Verdict::Unchecked);
}
