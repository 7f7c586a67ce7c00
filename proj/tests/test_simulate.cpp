#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

namespace sf = slowfast;
using sf::testing::ScalarSpec;
using sf::testing::scalar_model;

namespace {

sf::AveragedPath flat_path(double x0) {
    const sf::AveragedDrift zero([](std::span<const double>) { return std::vector<double>{0.0}; });
    return sf::solve_xbar(zero, {x0}, 64);
}

sf::SimConfig base_config(std::size_t paths, std::uint64_t seed = 3) {
    sf::SimConfig cfg;
    cfg.epsilon = 0.01;
    cfg.path_count = paths;
    cfg.seed = seed;
    cfg.workers = 1;
    return cfg;
}

}  // namespace

TEST(Scales, StepRuleAndCap) {
    const auto m = scalar_model({});
    auto cfg = base_config(1);
    const auto s = sf::sim_scales(m, cfg);
    EXPECT_DOUBLE_EQ(s.delta, 0.01);
    EXPECT_DOUBLE_EQ(s.h, std::pow(0.01, -0.25));
    EXPECT_EQ(s.steps, 2000u);
    EXPECT_TRUE(s.stiffness_ok());
    cfg.epsilon = 0.5;
    EXPECT_EQ(sf::sim_scales(m, cfg).steps, 1024u);
    cfg.substeps = 10;
    EXPECT_THROW((void)sf::sim_scales(m, cfg), sf::Error);
}

TEST(Simulate, BrownianSlowVariableHasVarianceEpsilon) {
    const auto m = scalar_model({});
    const auto paths = sf::simulate_uncontrolled(m, base_config(4000));
    std::vector<double> x;
    for (const auto& p : paths) x.push_back(p.final_x(1)[0]);
    const auto est = sf::mean_estimate(x);
    const double n = static_cast<double>(x.size());
    EXPECT_NEAR(est.mean, 0.0, 3.0 * std::sqrt(0.01 / n));
    EXPECT_NEAR(est.variance, 0.01, 3.0 * 0.01 * std::sqrt(2.0 / n));
}

TEST(Simulate, ZeroControlReproducesUncontrolledBitwise) {
    const auto m = sf::example1();
    sf::AveragedDrift drift(m);
    const auto xbar = sf::solve_xbar(drift, m.x0, 128);
    auto cfg = base_config(20);
    cfg.record_stride = 100;
    const auto plain = sf::simulate_uncontrolled(m, cfg, &xbar);
    const auto ctl = sf::simulate_controlled(m, cfg, xbar, sf::constant_control({0.0, 0.0}));
    ASSERT_EQ(plain.size(), ctl.size());
    for (std::size_t p = 0; p < plain.size(); ++p) {
        EXPECT_EQ(plain[p].X, ctl[p].X);
        EXPECT_EQ(plain[p].Y, ctl[p].Y);
        EXPECT_EQ(plain[p].eta, ctl[p].eta);
        EXPECT_EQ(ctl[p].log_weight, 0.0);
    }
}

TEST(Simulate, ConstantControlShiftsDeviationMean) {
    // b = c = 0, sigma = 1: eta_1 = u1 + W_1 / h
    const auto m = scalar_model({});
    auto cfg = base_config(2000);
    cfg.h = 2.0;
    const auto paths = sf::simulate_controlled(m, cfg, flat_path(0.0), sf::constant_control({0.7, -0.4}));
    std::vector<double> eta;
    for (const auto& p : paths) eta.push_back(p.final_eta(1)[0]);
    const auto est = sf::mean_estimate(eta);
    EXPECT_NEAR(est.mean, 0.7, 3.0 * est.std_error);
    EXPECT_NEAR(est.variance, 0.25, 3.0 * 0.25 * std::sqrt(2.0 / 2000.0));
}

TEST(Simulate, GirsanovWeightHasUnitMean) {
    const auto m = sf::example1();
    sf::AveragedDrift drift(m);
    const auto xbar = sf::solve_xbar(drift, m.x0, 128);
    auto cfg = base_config(4000);
    cfg.h = 1.0;
    const auto paths = sf::simulate_controlled(m, cfg, xbar, sf::constant_control({0.5, 0.3}));
    std::vector<double> w;
    for (const auto& p : paths) w.push_back(std::exp(p.log_weight));
    const auto est = sf::mean_estimate(w);
    EXPECT_NEAR(est.mean, 1.0, 3.0 * est.std_error);
    // exact variance exp(|u|^2) - 1
    EXPECT_NEAR(est.variance, std::expm1(0.34), 0.1);
}

TEST(Simulate, CirStaysUsableAndRelaxesToGamma) {
    const auto m = sf::example3();
    auto negative_fraction = [&](std::size_t substeps, std::vector<double>* y) {
        auto cfg = base_config(1000);
        cfg.epsilon = 0.02;
        cfg.substeps = substeps;
        const auto paths = sf::simulate_uncontrolled(m, cfg);
        std::size_t negative = 0;
        for (const auto& p : paths) {
            if (y) y->push_back(std::max(p.Y.back(), 0.0));
            negative += p.negative_fast_steps;
            for (const double x : p.X) EXPECT_TRUE(std::isfinite(x));
        }
        return static_cast<double>(negative) / static_cast<double>(paths.size() * sf::sim_scales(m, cfg).steps);
    };
    std::vector<double> y;
    const double coarse = negative_fraction(20, &y);
    const double fine = negative_fraction(80, nullptr);
    // Full truncation only repairs discretization overshoot, which shrinks with the step.
    EXPECT_LT(coarse, 1e-2);
    EXPECT_LT(fine, coarse);
    const auto est = sf::mean_estimate(y);
    // stationary law 4y exp(-2y): mean 1, variance 1/2
    EXPECT_NEAR(est.mean, 1.0, 4.0 * est.std_error + 0.02);
    EXPECT_NEAR(est.variance, 0.5, 0.1);
}

TEST(Simulate, DoublingSubstepsKeepsEstimatesWithinOneStandardError) {
    const auto m = sf::example1();
    sf::AveragedDrift drift(m);
    const auto xbar = sf::solve_xbar(drift, m.x0, 128);
    auto mean_eta = [&](std::size_t substeps) {
        auto cfg = base_config(2000);
        cfg.substeps = substeps;
        const auto paths = sf::simulate_uncontrolled(m, cfg, &xbar);
        std::vector<double> v;
        for (const auto& p : paths) v.push_back(p.final_x(1)[0]);
        return sf::mean_estimate(v);
    };
    const auto a = mean_eta(20), b = mean_eta(40);
    EXPECT_LT(std::abs(a.mean - b.mean), std::max(a.std_error, b.std_error)) << a.mean << " " << b.mean;
}

TEST(Simulate, WorkerCountDoesNotChangeResults) {
    const auto m = sf::example1();
    sf::AveragedDrift drift(m);
    const auto xbar = sf::solve_xbar(drift, m.x0, 128);
    auto cfg = base_config(13);
    const auto one = sf::simulate_controlled(m, cfg, xbar, sf::constant_control({0.2, 0.1}));
    cfg.workers = 4;
    const auto four = sf::simulate_controlled(m, cfg, xbar, sf::constant_control({0.2, 0.1}));
    for (std::size_t p = 0; p < one.size(); ++p) {
        EXPECT_EQ(one[p].X, four[p].X);
        EXPECT_EQ(one[p].Y, four[p].Y);
        EXPECT_EQ(one[p].log_weight, four[p].log_weight);
    }
}

TEST(Simulate, AntitheticPairsMirrorNoise) {
    const auto m = scalar_model({});
    auto cfg = base_config(6);
    cfg.antithetic = true;
    const auto paths = sf::simulate_uncontrolled(m, cfg);
    for (std::size_t p = 0; p < paths.size(); p += 2) {
        EXPECT_NEAR(paths[p].final_x(1)[0] + paths[p + 1].final_x(1)[0], 0.0, 1e-12);
        EXPECT_NEAR(paths[p].Y.back() + paths[p + 1].Y.back(), 0.0, 1e-9);
    }
    EXPECT_THROW((void)sf::mean_estimate(std::vector<double>{1.0, 2.0, 3.0}, true), sf::Error);
}

TEST(Simulate, PathsCsvLayout) {
    const auto m = scalar_model({});
    auto cfg = base_config(2);
    cfg.record_stride = 500;
    const auto paths = sf::simulate_uncontrolled(m, cfg);
    const auto t = sf::paths_csv(paths, 1, 1);
    EXPECT_EQ(t.columns, (std::vector<std::string>{"path", "t", "x_1", "y_1"}));
    EXPECT_EQ(t.rows.size(), 2u * 5u);
}

TEST(MomentDiagnostic, RecurrentFastProcessIsNotFlagged) {
    const auto m = scalar_model({});
    auto cfg = base_config(200);
    const auto rep = sf::y_moment_diagnostic(m, cfg, {0.05, 0.02, 0.01}, 2.0);
    EXPECT_FALSE(rep.flagged);
    for (const auto& r : rep.rows) EXPECT_NEAR(r.estimate, 1.0, 0.15);
}

TEST(MomentDiagnostic, CirIsFlat) {
    const auto m = sf::example3();
    auto cfg = base_config(200);
    const auto rep = sf::y_moment_diagnostic(m, cfg, {0.05, 0.02, 0.01}, 2.0);
    EXPECT_FALSE(rep.flagged);
    // E Y^2 = 3/2 under the gamma law; Y starts at its mean
    for (const auto& r : rep.rows) EXPECT_NEAR(r.estimate, 1.5, 0.2);
}

TEST(MomentDiagnostic, ExplosiveFastProcessIsFlagged) {
    ScalarSpec s;
    s.f = [](double, double y) { return y; };
    s.y0 = 0.1;
    const auto m = scalar_model(s);
    auto cfg = base_config(20);
    const auto rep = sf::y_moment_diagnostic(m, cfg, {0.05, 0.02}, 2.0);
    EXPECT_TRUE(rep.flagged);
}

TEST(MomentDiagnostic, DiffusingFastProcessIsFlagged) {
    ScalarSpec s;
    s.f = sf::testing::constant(0.0);
    const auto m = scalar_model(s);
    auto cfg = base_config(200);
    const auto rep = sf::y_moment_diagnostic(m, cfg, {0.05, 0.02, 0.01}, 2.0);
    EXPECT_TRUE(rep.flagged);
    EXPECT_LT(rep.log_slope, -0.5);
}
