#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "support.hpp"

namespace sf = slowfast;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using sf::testing::normal_cdf;
using sf::testing::scalar_model;

namespace {

// b = c = 0, sigma = 1: eta_1 = W_1 / h exactly, q = 1, kappa = 0.
struct BrownianCase {
    sf::SlowFastModel model = scalar_model({});
    sf::AveragedPath xbar = sf::solve_xbar(
        sf::AveragedDrift([](std::span<const double>) { return std::vector<double>{0.0}; }), {0.0}, 64);
};

sf::EventSpec at_least(double a) {
    return {VectorXd::Ones(1), a, sf::EventDirection::AtLeast};
}

sf::SimConfig config(std::size_t paths) {
    sf::SimConfig cfg;
    cfg.epsilon = 0.01;
    cfg.path_count = paths;
    cfg.seed = 5;
    cfg.workers = 1;
    cfg.h = 1.0;
    return cfg;
}

}  // namespace

TEST(Wilson, KnownValues) {
    const auto [lo, hi] = sf::wilson_interval(0, 100);
    EXPECT_EQ(lo, 0.0);
    EXPECT_NEAR(hi, 0.036994, 1e-6);
    const auto [l2, h2] = sf::wilson_interval(50, 100);
    EXPECT_NEAR(l2, 0.403832, 1e-6);
    EXPECT_NEAR(h2, 0.596168, 1e-6);
}

TEST(EventRate, GaussianHalfspace) {
    const auto pc = sf::constant_coefficients(MatrixXd::Zero(1, 1), VectorXd::Zero(1), MatrixXd::Identity(1, 1), 64);
    EXPECT_NEAR(sf::event_minimizer(pc, at_least(2.0)).value, 2.0, 1e-10);
    EXPECT_NEAR(sf::mdp_asymptote(pc, at_least(2.0), 1.0), std::exp(-2.0), 1e-10);
    // the zero-cost path already ends in the event
    EXPECT_EQ(sf::event_minimizer(pc, at_least(0.0)).value, 0.0);
    EXPECT_EQ(sf::mdp_asymptote(pc, at_least(0.0), 3.0), 1.0);
    EXPECT_EQ(sf::event_minimizer(pc, {VectorXd::Ones(1), 0.5, sf::EventDirection::AtMost}).value, 0.0);
    EXPECT_NEAR(sf::event_minimizer(pc, {VectorXd::Ones(1), -1.0, sf::EventDirection::AtMost}).value, 0.5, 1e-10);
}

TEST(EventRate, InvalidFunctionalRejected) {
    const auto pc = sf::constant_coefficients(MatrixXd::Zero(1, 1), VectorXd::Zero(1), MatrixXd::Identity(1, 1), 8);
    EXPECT_THROW((void)sf::event_minimizer(pc, {VectorXd::Zero(1), 1.0, sf::EventDirection::AtLeast}), sf::Error);
    EXPECT_THROW((void)sf::event_minimizer(pc, {VectorXd::Ones(2), 1.0, sf::EventDirection::AtLeast}), sf::Error);
}

TEST(PlainEstimator, GaussianTail) {
    const BrownianCase bc;
    const auto r = sf::estimate_plain(bc.model, config(4000), bc.xbar, at_least(1.5));
    const double exact = 1.0 - normal_cdf(1.5);
    EXPECT_NEAR(r.estimate, exact, 3.0 * r.std_error);
    EXPECT_LE(r.ci_lo, exact);
    EXPECT_GE(r.ci_hi, exact);
    EXPECT_GE(r.second_moment, r.estimate * r.estimate);
    EXPECT_EQ(r.method, "plain");
}

TEST(PlainEstimator, CertainAndImpossibleEvents) {
    const BrownianCase bc;
    const auto all = sf::estimate_plain(bc.model, config(200), bc.xbar, at_least(-std::numeric_limits<double>::infinity()));
    EXPECT_EQ(all.estimate, 1.0);
    EXPECT_EQ(all.hits, 200u);
    const auto none = sf::estimate_plain(bc.model, config(200), bc.xbar, at_least(50.0));
    EXPECT_EQ(none.estimate, 0.0);
    EXPECT_TRUE(none.zero_hits);
    EXPECT_GT(none.ci_hi, 0.0);
}

TEST(ImportanceSampling, GaussianTailWithSmallError) {
    const BrownianCase bc;
    sf::RateIngredients ing(bc.model);
    const double a = 3.0;
    const auto r = sf::estimate_is(bc.model, config(2000), ing, bc.xbar, at_least(a), 64);
    const double exact = 1.0 - normal_cdf(a);
    EXPECT_NEAR(r.s_star, 0.5 * a * a, 1e-8);
    EXPECT_NEAR(r.estimate, exact, 3.0 * r.std_error);
    EXPECT_LT(r.relative_error, 0.1);
    EXPECT_GE(r.second_moment, r.estimate * r.estimate);
    EXPECT_NEAR(r.weight_mean, 1.0, 4.0 * r.weight_std_error);
    EXPECT_NEAR(r.mdp_approx, std::exp(-4.5), 1e-12);
}

TEST(ImportanceSampling, ExampleOneAgreesWithPlain) {
    const auto m = sf::example1();
    sf::RateIngredients ing(m);
    sf::AveragedDrift drift(m);
    const auto xbar = sf::solve_xbar(drift, m.x0, 128);
    auto cfg = config(4000);
    cfg.epsilon = 0.05;
    const auto pc = sf::path_coefficients(ing, xbar, 64);
    const double v1 = sf::lyapunov_variance(pc).back()(0, 0);
    const auto event = at_least(1.6 * std::sqrt(v1));
    const auto plain = sf::estimate_plain(m, cfg, xbar, event);
    const auto is = sf::estimate_is(m, cfg, ing, xbar, event, 64);
    EXPECT_LT(std::abs(plain.estimate - is.estimate), 3.0 * std::hypot(plain.std_error, is.std_error))
        << plain.estimate << " " << is.estimate;
    EXPECT_LT(is.std_error, plain.std_error);
}
