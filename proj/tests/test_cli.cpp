#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "slowfast/cli.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
namespace cli = slowfast::cli;

namespace {

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("slowfast_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    int run(std::vector<std::string> args) {
        out_.str("");
        err_.str("");
        return cli::run(args, out_, err_);
    }
    std::string out(const std::string& name) const { return (dir_ / name).string(); }

    static std::string slurp(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    }

    fs::path dir_;
    std::ostringstream out_, err_;
};

}  // namespace

TEST_F(CliTest, HelpAndUsageErrors) {
    EXPECT_EQ(run({"--help"}), cli::kExitOk);
    EXPECT_EQ(run({}), cli::kExitUsage);
    EXPECT_EQ(run({"validate", "--bogus", "1"}), cli::kExitUsage);
    EXPECT_EQ(run({"frobnicate"}), cli::kExitUsage);
    EXPECT_EQ(run({"validate", "--set", "simulation.pathz=3", "--out", out("a")}), cli::kExitUsage);
    EXPECT_EQ(run({"validate", "--param", "kappa=1", "--out", out("a")}), cli::kExitUsage);
    EXPECT_EQ(run({"validate", "--param", "kappa", "--out", out("a")}), cli::kExitUsage);
    EXPECT_EQ(run({"validate", "--config", out("missing.ini")}), cli::kExitUsage);
    EXPECT_NE(err_.str().find("error"), std::string::npos);
}

TEST_F(CliTest, ValidateWritesManifestAndConditions) {
    ASSERT_EQ(run({"validate", "--model", "example1", "--out", out("v")}), cli::kExitOk) << err_.str();
    const auto manifest = slurp(dir_ / "v" / "manifest.ini");
    EXPECT_EQ(manifest.rfind("; status = validated\n", 0), 0u);
    EXPECT_NE(manifest.find("[parameters]"), std::string::npos);
    const auto cond = slurp(dir_ / "v" / "conditions.txt");
    EXPECT_NE(cond.find("tightness.first_group"), std::string::npos);
}

TEST_F(CliTest, FailedConditionsStopUnlessForced) {
    // q_b = 0.9 breaks the tightness inequalities at r = 1
    EXPECT_EQ(run({"validate", "--model", "example1", "--qb", "0.9", "--out", out("f")}), cli::kExitValidation);
    EXPECT_EQ(run({"averaged", "--model", "example1", "--qb", "0.9", "--out", out("f")}), cli::kExitValidation);
    EXPECT_FALSE(fs::exists(dir_ / "f" / "xbar.csv"));
    ASSERT_EQ(run({"averaged", "--model", "example1", "--qb", "0.9", "--force", "--out", out("f")}), cli::kExitOk)
        << err_.str();
    EXPECT_NE(slurp(dir_ / "f" / "xbar.csv").find("# status = unvalidated"), std::string::npos);
    EXPECT_EQ(slurp(dir_ / "f" / "manifest.ini").rfind("; status = unvalidated", 0), 0u);
}

TEST_F(CliTest, RuntimeErrorsExitOne) {
    EXPECT_EQ(run({"simulate", "--model", "example1", "--eps", "1.5", "--paths", "2", "--out", out("e")}),
              cli::kExitRuntime);
}

TEST_F(CliTest, RateTableMatchesBesselOracle) {
    ASSERT_EQ(run({"rate", "--model", "example2", "--x-grid", "-1:1:5", "--out", out("r")}), cli::kExitOk) << err_.str();
    std::ifstream in(dir_ / "r" / "rate.csv");
    std::string line;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line[0] == 'x') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(row);
    }
    ASSERT_EQ(rows.size(), 5u);
    const double i0 = slowfast::testing::bessel_i0(1.0);
    for (const auto& r : rows) {
        EXPECT_NEAR(r[1], -r[0] / (i0 * i0), 1e-4);   // lambda_bar
        EXPECT_NEAR(r[2], -1.0 / (i0 * i0), 1e-6);    // kappa_A
        EXPECT_NEAR(r[4], 2.0 / (i0 * i0), 1e-7);     // q
    }
}

TEST_F(CliTest, PrecedenceConfigSetParamFlag) {
    {
        std::ofstream ini(dir_ / "run.ini");
        ini << "[model]\nname = example1\n[parameters]\nsigma = 1.5\n[simulation]\npaths = 7\nseed = 4\n";
    }
    ASSERT_EQ(run({"validate", "--config", out("run.ini"), "--set", "simulation.paths=8", "--set", "parameters.sigma=2",
                   "--param", "sigma=3", "--paths", "9", "--out", out("p")}),
              cli::kExitOk)
        << err_.str();
    std::istringstream manifest(slurp(dir_ / "p" / "manifest.ini"));
    const auto cfg = slowfast::RunConfig::from_ini(manifest);
    EXPECT_EQ(cfg.get("simulation", "paths"), "9");
    EXPECT_EQ(cfg.get("simulation", "seed"), "4");
    EXPECT_EQ(cfg.parameters().at("sigma"), "3");
}

TEST_F(CliTest, RerunReproducesOutputsBitwise) {
    ASSERT_EQ(run({"simulate", "--model", "example3", "--paths", "6", "--eps", "0.1", "--seed", "17", "--record-stride",
                   "64", "--workers", "2", "--out", out("one")}),
              cli::kExitOk)
        << err_.str();
    ASSERT_EQ(run({"--set", "output.dir=" + out("two"), "rerun", out("one/manifest.ini")}), cli::kExitOk) << err_.str();
    const auto a = slurp(dir_ / "one" / "paths.csv"), b = slurp(dir_ / "two" / "paths.csv");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, b);
    EXPECT_EQ(run({"rerun", out("one/manifest.ini"), "--config", out("x.ini")}), cli::kExitUsage);
}
