#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("cctune_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "small.cfg") << "case = " << CCTUNE_DATA_DIR << "/rts24.case\n"
                                      << "uncertain_buses = 8, 15\n"
                                         "modes = single\neps = 0.1\ndistributions = gaussian\n"
                                         "replications = 1\nn_tuning = 1000\nn_oos = 2000\ngamma = 1e-3\n"
                                         "width_tol = 1e-4\nseed = 5\n"
                                         "dist.gaussian.type = gaussian\ndist.gaussian.std_mw = 9.4, 13.1\n"
                                         "dist.gaussian.rho = 0.2\n";
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) {
    const std::string cmd = std::string(CCTUNE_CLI_PATH) + " " + args + " > " + (dir_ / "stdout").string() +
                            " 2> " + (dir_ / "stderr").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string read(const fs::path& p) const {
    std::ifstream in(p);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
  }
  std::string out() const { return read(dir_ / "stdout"); }
  std::string err() const { return read(dir_ / "stderr"); }
  std::string cfg() const { return "--config " + (dir_ / "small.cfg").string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, ParseCase) {
  EXPECT_EQ(run("parse " + std::string(CCTUNE_DATA_DIR) + "/rts24.case"), 0);
  EXPECT_NE(out().find("buses 24, lines 38"), std::string::npos);
  EXPECT_EQ(run("parse " + std::string(CCTUNE_DATA_DIR) + "/rts24.case --rts --out " + (dir_ / "n.case").string()), 0);
  EXPECT_TRUE(fs::exists(dir_ / "n.case"));
  EXPECT_EQ(run("parse " + (dir_ / "missing.case").string()), 1);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("--no-such-flag"), 1);
  EXPECT_EQ(run("solve " + cfg()), 1);  // --s is required
  EXPECT_EQ(run("tune " + cfg() + " --mode both"), 1);
  EXPECT_EQ(run("tune " + cfg() + " --dist nothere"), 1);
  EXPECT_EQ(run("experiment " + cfg() + " --format xml"), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, SolveStatuses) {
  EXPECT_EQ(run("solve " + cfg() + " --s 1.0 --lp " + (dir_ / "p.lp").string()), 0);
  EXPECT_NE(out().find("status optimal"), std::string::npos);
  EXPECT_NE(read(dir_ / "p.lp").find("Subject To"), std::string::npos);
  EXPECT_EQ(run("solve " + cfg() + " --s 100"), 2);
  EXPECT_NE(out().find("status infeasible"), std::string::npos);
}

TEST_F(Cli, TuneWritesTrace) {
  EXPECT_EQ(run("tune " + cfg() + " --out " + dir_.string()), 0);
  const std::string trace = read(dir_ / "trace.csv");
  EXPECT_EQ(trace.rfind("iteration,s_k,feasible,eps_obs_single,eps_obs_joint,cost\n0,0,1,", 0), 0u);
  EXPECT_NE(err().find("terminated by"), std::string::npos);
}

TEST_F(Cli, EvaluateAndSample) {
  EXPECT_EQ(run("evaluate " + cfg() + " --s 1.5 --oos"), 0);
  const auto j = nlohmann::json::parse(out());
  EXPECT_EQ(j["n_samples"], 2000);
  EXPECT_EQ(j["constraints"].size(), 96u);
  EXPECT_EQ(run("evaluate " + cfg() + " --s 100"), 2);

  EXPECT_EQ(run("sample " + cfg() + " --n 5 --out " + dir_.string()), 0);
  std::istringstream in(read(dir_ / "samples.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("# rng philox4x32-10", 0), 0u);
  std::getline(in, line);
  EXPECT_EQ(line, "bus8_mw,bus15_mw");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 5);

  EXPECT_EQ(run("ptdf " + cfg()), 0);
  std::istringstream p(out());
  int lines = 0;
  while (std::getline(p, line)) ++lines;
  EXPECT_EQ(lines, 38);
}

TEST_F(Cli, ExperimentReport) {
  EXPECT_EQ(run("experiment " + cfg() + " --format json --out " + dir_.string()), 0);
  const auto j = nlohmann::json::parse(read(dir_ / "report.json"));
  EXPECT_EQ(j["rows"].size(), 1u);
  EXPECT_EQ(run("experiment " + cfg() + " --eps 0.1,0.05"), 0);
  EXPECT_EQ(out().rfind("mode,distribution,eps_des,replication", 0), 0u);
  EXPECT_NE(out().find("single,gaussian,0.05,avg"), std::string::npos);
}
