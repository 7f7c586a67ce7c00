#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "slowfast/config.hpp"
#include "support.hpp"

namespace sf = slowfast;

namespace {

double eval(const std::string& text, std::vector<double> args = {0.7, -1.3}) {
    return sf::Expression::parse(text, sf::state_slots(1, 1))(args);
}

sf::ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const sf::Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return sf::ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Expression, ArithmeticAndPrecedence) {
    EXPECT_DOUBLE_EQ(eval("1 + 2 * 3"), 7.0);
    EXPECT_DOUBLE_EQ(eval("(1 + 2) * 3"), 9.0);
    EXPECT_DOUBLE_EQ(eval("2 ^ 3 ^ 2"), 512.0);
    EXPECT_DOUBLE_EQ(eval("-2 ^ 2"), -4.0);
    EXPECT_DOUBLE_EQ(eval("2 ^ -1"), 0.5);
    EXPECT_DOUBLE_EQ(eval("8 / 4 / 2"), 1.0);
    EXPECT_DOUBLE_EQ(eval("1 - 2 - 3"), -4.0);
    EXPECT_DOUBLE_EQ(eval("1.5e2"), 150.0);
}

TEST(Expression, VariablesAndFunctions) {
    const double x = 0.7, y = -1.3;
    EXPECT_DOUBLE_EQ(eval("cos(x1) * cos(y1)"), std::cos(x) * std::cos(y));
    EXPECT_DOUBLE_EQ(eval("exp(-y1^2/2) + sqrt(abs(y1))"), std::exp(-y * y / 2) + std::sqrt(std::abs(y)));
    EXPECT_DOUBLE_EQ(eval("sin(2*pi*x1) + log(x1)"), std::sin(2 * M_PI * x) + std::log(x));
}

TEST(Expression, ReportsSlotUsage) {
    const auto e = sf::Expression::parse("y1 * y2 + 1", sf::state_slots(1, 2));
    EXPECT_FALSE(e.uses(0));
    EXPECT_TRUE(e.uses(1));
    EXPECT_TRUE(e.uses(2));
}

TEST(Expression, MalformedInputIsConfigError) {
    for (const char* bad : {"1 +", "cos(x1", "foo(1)", "z3", "2 $ 3", "", "x1 x1"})
        EXPECT_EQ(code_of([&] { (void)eval(bad); }), sf::ErrorCode::ConfigError) << bad;
}

TEST(Expression, ErrorNamesColumn) {
    try {
        (void)eval("1 + * 2");
        FAIL();
    } catch (const sf::Error& e) {
        EXPECT_NE(std::string(e.what()).find("column 5"), std::string::npos) << e.what();
    }
}

TEST(Coefficient, RowMajorMatrixAndCountCheck) {
    const auto c = sf::compile_coefficient("x1; y1; x1*y1; 2", 1, 1, 4);
    EXPECT_TRUE(c.uses_x);
    std::vector<double> out(4);
    const double x[1] = {3.0}, y[1] = {5.0};
    c.fn(x, y, out);
    EXPECT_EQ(out, (std::vector<double>{3.0, 5.0, 15.0, 2.0}));
    EXPECT_EQ(code_of([] { (void)sf::compile_coefficient("1; 2", 1, 1, 1); }), sf::ErrorCode::ConfigError);
    EXPECT_EQ(code_of([] { (void)sf::compile_coefficient("1;;2", 1, 1, 3); }), sf::ErrorCode::ConfigError);
    EXPECT_FALSE(sf::compile_coefficient("-y1/2", 1, 1, 1).uses_x);
}

TEST(RunConfig, UnknownKeysRejected) {
    sf::RunConfig cfg;
    EXPECT_EQ(code_of([&] { cfg.set("simulation", "pathz", "3"); }), sf::ErrorCode::ConfigError);
    EXPECT_EQ(code_of([&] { cfg.set("nosuch", "x", "3"); }), sf::ErrorCode::ConfigError);
    EXPECT_EQ(code_of([&] { cfg.set_assignment("simulation.paths"); }), sf::ErrorCode::ConfigError);
    std::istringstream ini("[simulation]\npaths = 5\nbogus = 1\n");
    EXPECT_EQ(code_of([&] { (void)sf::RunConfig::from_ini(ini); }), sf::ErrorCode::ConfigError);
}

TEST(RunConfig, TypedAccess) {
    sf::RunConfig cfg;
    cfg.set_assignment("simulation.paths=250");
    cfg.set("query", "epsilons", "0.1; 0.05");
    EXPECT_EQ(cfg.count("simulation", "paths"), 250u);
    EXPECT_EQ(cfg.list("query", "epsilons"), (std::vector<double>{0.1, 0.05}));
    EXPECT_TRUE(cfg.is_explicit("simulation", "paths"));
    EXPECT_FALSE(cfg.is_explicit("simulation", "seed"));
    cfg.set("simulation", "paths", "2.5");
    EXPECT_EQ(code_of([&] { (void)cfg.count("simulation", "paths"); }), sf::ErrorCode::ConfigError);
    cfg.set("output", "force", "maybe");
    EXPECT_EQ(code_of([&] { (void)cfg.flag("output", "force"); }), sf::ErrorCode::ConfigError);
}

TEST(RunConfig, IniRoundTripIsStable) {
    std::istringstream ini(
        "[model]\nname = example2\n[parameters]\nD = 2\n[simulation]\npaths = 77\nseed = 9\n[query]\nepsilons = 0.1;0.01\n");
    const auto cfg = sf::RunConfig::from_ini(ini);
    const std::string text = cfg.to_ini();
    std::istringstream again(text);
    const auto cfg2 = sf::RunConfig::from_ini(again);
    EXPECT_EQ(cfg2.to_ini(), text);
    EXPECT_EQ(cfg2.get("simulation", "paths"), "77");
    EXPECT_EQ(cfg2.parameters().at("D"), "2");
    EXPECT_EQ(text.find("[coefficients]"), std::string::npos);
}

TEST(RunConfig, BuiltinRejectsCustomSections) {
    sf::RunConfig cfg;
    cfg.set("model", "name", "example1");
    cfg.set("coefficients", "b", "y1");
    EXPECT_EQ(code_of([&] { (void)sf::build_model(cfg); }), sf::ErrorCode::ConfigError);
}

TEST(RunConfig, UnknownBuiltinOrParameterRejected) {
    sf::RunConfig cfg;
    cfg.set("model", "name", "example9");
    EXPECT_EQ(code_of([&] { (void)sf::build_model(cfg); }), sf::ErrorCode::ConfigError);
    cfg.set("model", "name", "example1");
    cfg.set("parameters", "kappa", "1");
    EXPECT_EQ(code_of([&] { (void)sf::build_model(cfg); }), sf::ErrorCode::ConfigError);
}

TEST(RunConfig, ResolveEchoesDefaults) {
    sf::RunConfig cfg;
    cfg.set("model", "name", "example3");
    const auto m = sf::build_model(cfg);
    sf::resolve_config(cfg, m);
    EXPECT_EQ(cfg.parameters().at("c_power"), "0.5");
    EXPECT_EQ(cfg.number("exponents", "q_c"), 0.5);
    EXPECT_EQ(cfg.number("query", "x"), 0.5);
}

TEST(RunConfig, CustomExampleOneMatchesBuiltin) {
    std::istringstream ini(
        "[model]\nname = custom\n"
        "[coefficients]\nb = cos(x1)*cos(y1)\nc = 0\nsigma = 1\nf = -y1/2\ng = 0\ntau1 = 0\ntau2 = 1\n"
        "[exponents]\nr = 1\nGamma = 0.4\nR_rec = 1\n"
        "[regime]\nregime = 2\ngamma = 1\nc_delta = 1\np = 1\n"
        "[initial]\nx0 = 0.5\ny0 = 0\n");
    const auto cfg = sf::RunConfig::from_ini(ini);
    const auto custom = sf::build_model(cfg);
    const auto builtin = sf::example1();
    EXPECT_FALSE(custom.fast_depends_on_x);
    EXPECT_EQ(custom.regime(), sf::Regime::Two);
    for (double x : {-1.0, 0.3, 2.0})
        for (double y : {-3.0, 0.0, 1.7}) {
            const double xs[1] = {x}, ys[1] = {y};
            EXPECT_DOUBLE_EQ(custom.b(xs, ys)[0], builtin.b(xs, ys)[0]);
            EXPECT_DOUBLE_EQ(custom.f(xs, ys)[0], builtin.f(xs, ys)[0]);
            EXPECT_DOUBLE_EQ(custom.fast_diffusion(xs, ys)[0], builtin.fast_diffusion(xs, ys)[0]);
        }
    sf::RateIngredients a(custom), b(builtin);
    EXPECT_NEAR(a.at(0.5)->q.value(0, 0), b.at(0.5)->q.value(0, 0), 1e-12);
    EXPECT_NEAR(a.at(0.5)->lambda_bar[0], b.at(0.5)->lambda_bar[0], 1e-12);
}

TEST(RunConfig, CustomMissingCoefficientRejected) {
    sf::RunConfig cfg;
    cfg.set("model", "name", "custom");
    cfg.set("coefficients", "b", "y1");
    EXPECT_EQ(code_of([&] { (void)sf::build_model(cfg); }), sf::ErrorCode::ConfigError);
}
