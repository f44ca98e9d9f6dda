#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

const std::string kCli = ANNSLE_CLI_PATH;

int run(const std::string& args, const std::string& out = "/dev/null")
{
    const std::string cmd = kCli + " " + args + " >" + out + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, sep);) out.push_back(f);
    return out;
}

// Last CSV row of a file with a header line.
std::vector<std::string> last_row(const fs::path& p)
{
    std::ifstream in(p);
    std::string line, last;
    while (std::getline(in, line))
        if (!line.empty()) last = line;
    return split(last, ',');
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir = fs::temp_directory_path() /
              ("annsle_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    std::string path(const std::string& name) const { return (dir / name).string(); }

    fs::path dir;
};

}  // namespace

TEST_F(Cli, KernelEvalMatchesCotangentLimit)
{
    ASSERT_EQ(run("kernel-eval --kind H --p inf --z 1,0", path("h.csv")), 0);
    const auto row = last_row(path("h.csv"));
    ASSERT_EQ(row.size(), 6u);
    EXPECT_NEAR(std::stod(row[4]), 1.0 / std::tan(0.5), 1e-14);
    EXPECT_EQ(std::stod(row[5]), 0.0);
}

TEST_F(Cli, KernelEvalVanishesAtPi)
{
    ASSERT_EQ(run("kernel-eval --kind HI --p 1 --z 3.14159265,0", path("hi.csv")), 0);
    EXPECT_NEAR(std::stod(last_row(path("hi.csv"))[4]), 0.0, 1e-7);
}

TEST_F(Cli, KernelEvalRegressionValue)
{
    ASSERT_EQ(run("kernel-eval --kind H --p 0.5 --z 0.3,0", path("h.csv")), 0);
    EXPECT_NEAR(std::stod(last_row(path("h.csv"))[4]), 7.9327791531270337, 1e-12);
}

TEST_F(Cli, PoleAndBadInputGiveExitTwo)
{
    EXPECT_EQ(run("kernel-eval --kind H --p 1 --z 0,0"), 2);
    EXPECT_EQ(run("kernel-eval --kind Q --p 1 --z 1,0"), 2);
    EXPECT_EQ(run("simulate --mode annulus --family kappa2/1 --kappa 2"), 2);
    EXPECT_EQ(run("no-such-command"), 2);
}

TEST_F(Cli, PdeCheckExitCodes)
{
    EXPECT_EQ(run("pde-check --family 'kappa4/1?C=0' --kappa 4 --pde crossing"), 0);
    EXPECT_EQ(run("pde-check --family const-zero --kappa 2 --pde crossing"), 1);
    EXPECT_EQ(run("pde-check --family kappa3/1 --kappa 3 --pde crossing"), 0);
}

TEST_F(Cli, CommuteWithEmptyHullIsExact)
{
    ASSERT_EQ(run("commute --kappa 0 --t1 0 --t2 0.3 --out " + path("probe.csv")), 0);
}

TEST_F(Cli, IdenticalInvocationsGiveIdenticalFiles)
{
    const std::string args = "simulate --mode annulus --family kappa2/1 --kappa 2 --p 4 --dt 1e-3 --t-end 0.2 "
                             "--paths 3 --seed 11 --out ";
    ASSERT_EQ(run(args + path("a.csv") + " --manifest " + path("a.json")), 0);
    ASSERT_EQ(run(args + path("b.csv") + " --manifest " + path("b.json")), 0);
    EXPECT_FALSE(slurp(path("a.csv")).empty());
    EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
}

TEST_F(Cli, ReplayReproducesOutput)
{
    ASSERT_EQ(run("trace --variant radial --driver brownian --kappa 2 --seed 3 --t-end 0.5 --dt 1e-3 "
                  "--times 0.1:0.5:5 --out " +
                  path("t.csv") + " --manifest " + path("t.json")),
              0);
    const std::string first = slurp(path("t.csv"));
    fs::remove(path("t.csv"));
    ASSERT_EQ(run("replay " + path("t.json")), 0);
    EXPECT_EQ(slurp(path("t.csv")), first);
}

TEST_F(Cli, MartingaleTrivialTimePasses)
{
    ASSERT_EQ(run("martingale --kappa 2 --family kappa2/1 --p 4 --t1 0.25 --t2 0 --n 20 --seed 7", path("m.txt")),
              0);
    const std::string out = slurp(path("m.txt"));
    EXPECT_NE(out.find("mean"), std::string::npos);
    EXPECT_NE(out.find("stderr"), std::string::npos);
    EXPECT_NE(out.find("rejection"), std::string::npos);
}
