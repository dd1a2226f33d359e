#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "oracles.hpp"

#ifndef STRIPLDP_CLI
#error "STRIPLDP_CLI must name the command-line binary"
#endif

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run run(const std::string& args)
{
    const std::string cmd = std::string(STRIPLDP_CLI) + " " + args + " 2>/dev/null";
    Run r;
    FILE* f = popen(cmd.c_str(), "r");
    if (!f) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, f)) > 0) r.out.append(buf, n);
    const int st = pclose(f);
    r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

std::string spec(const char* name) { return oracle::spec_path(name); }

std::string slurp(const std::string& path)
{
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(Cli, AnalyzeP075)
{
    auto r = run("analyze --levels 256 --spec " + spec("p075.json"));
    ASSERT_EQ(r.code, 0);
    auto j = stripldp::json::parse(r.out);
    EXPECT_NEAR(j["v0"].get<double>(), 0.5, 1e-4);
    EXPECT_NEAR(j["t0"].get<double>(), 2.0, 1e-4);
    EXPECT_EQ(j["regime"], "transient-right");
    EXPECT_NEAR(j["lambda_crit"][0].get<double>(), 0.143841036, 1e-6);
}

TEST(Cli, AnalyzeSymmetric)
{
    auto r = run("analyze --levels 256 --spec " + spec("symmetric.json"));
    ASSERT_EQ(r.code, 0);
    auto j = stripldp::json::parse(r.out);
    EXPECT_EQ(j["regime"], "recurrent");
    EXPECT_EQ(j["v0"].get<double>(), 0.0);
}

TEST(Cli, MalformedSpecIsUsageError)
{
    EXPECT_EQ(run("analyze --spec " + spec("malformed.json")).code, 2);
    EXPECT_EQ(run("analyze --spec /nonexistent.json").code, 2);
}

TEST(Cli, ImportanceSamplingNeedsM)
{
    EXPECT_EQ(run("simulate --method is --t 3 --n 50 --spec " + spec("p075.json")).code, 2);
}

TEST(Cli, BudgetExhaustionExitCode)
{
    EXPECT_EQ(run("simulate --t 3 --n 50 --trials 1000 --budget 10 --spec " + spec("p075.json")).code, 4);
}

TEST(Cli, RateCsvIsReproducible)
{
    const std::string out = ::testing::TempDir() + "/rate.csv";
    const std::string args = "rate --kind hitting --grid 1:0.5:4 --levels 128 --spec " + spec("p075.json") + " --out " + out;
    ASSERT_EQ(run(args).code, 0);
    const auto first = slurp(out);
    ASSERT_EQ(run(args).code, 0);
    EXPECT_EQ(first, slurp(out));
    EXPECT_NE(first.find("manifest="), std::string::npos);
    auto m = stripldp::json::parse(slurp(out + ".manifest.json"));
    EXPECT_EQ(m["command"], "rate");
    EXPECT_EQ(m["spec_hash"].get<std::string>().size(), 64u);
}

TEST(Cli, SpeedGridIncludesZero)
{
    auto r = run("rate --kind speed --grid -1:0.25:1 --levels 128 --spec " + spec("p075.json"));
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("\n0,0.1438"), std::string::npos) << r.out;
}

TEST(Cli, ConvertBoundedJump)
{
    auto r = run("convert-bounded-jump --spec " + spec("jump_2_2.json"));
    ASSERT_EQ(r.code, 0);
    auto j = stripldp::json::parse(r.out);
    EXPECT_EQ(j["d"], 2);
    auto r1 = run("convert-bounded-jump --spec " + spec("jump_1_1.json"));
    EXPECT_EQ(stripldp::json::parse(r1.out)["d"], 1);
}

TEST(Cli, GridOutsideDomain)
{
    EXPECT_EQ(run("rate --kind speed --grid 0:0.5:2 --spec " + spec("p075.json")).code, 2);
}
