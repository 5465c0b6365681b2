#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result cli(const std::string& args) {
  const std::string cmd = std::string(INTERCEPTLAB_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("interceptlab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string data(const std::string& rel) const { return std::string(INTERCEPTLAB_DATA) + "/" + rel; }
  std::string config() const { return data("configs/example.json"); }
  std::string minis() const { return "'" + data("trajectories/random_*.csv") + "'"; }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, RunWritesReport) {
  const Result r = cli("run " + config() + " --out " + (dir_ / "r.json").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(slurp(dir_ / "r.json"));
  EXPECT_EQ(j["method"], "epn");
  EXPECT_TRUE(j["events"].is_array());
  EXPECT_GT(j["detections"].get<int>(), 0);
}

TEST_F(CliTest, SameSeedGivesByteIdenticalReports) {
  ASSERT_EQ(cli("run " + config() + " --seed 5 --out " + (dir_ / "a.json").string()).code, 0);
  ASSERT_EQ(cli("run " + config() + " --seed 5 --out " + (dir_ / "b.json").string()).code, 0);
  ASSERT_EQ(cli("run " + config() + " --seed 6 --out " + (dir_ / "c.json").string()).code, 0);
  EXPECT_EQ(slurp(dir_ / "a.json"), slurp(dir_ / "b.json"));
  EXPECT_NE(slurp(dir_ / "a.json"), slurp(dir_ / "c.json"));
}

TEST_F(CliTest, SeedFromEnvironment) {
  ASSERT_EQ(cli("run " + config() + " --seed 11 --out " + (dir_ / "a.json").string()).code, 0);
  ASSERT_EQ(cli("run " + config() + " --out " + (dir_ / "b.json").string()).code, 0);
  const Result r = cli("run " + config() + " --out " + (dir_ / "c.json").string());
  ASSERT_EQ(r.code, 0);
  const std::string env_cmd = "INTERCEPT_LAB_SEED=11 " + std::string(INTERCEPTLAB_CLI) + " run " + config() +
                              " --out " + (dir_ / "d.json").string();
  ASSERT_EQ(std::system(env_cmd.c_str()), 0);
  EXPECT_EQ(slurp(dir_ / "a.json"), slurp(dir_ / "d.json"));
  EXPECT_EQ(slurp(dir_ / "b.json"), slurp(dir_ / "c.json"));
}

TEST_F(CliTest, MissingTrajectoryIsExitTwoWithPath) {
  const fs::path cfg = dir_ / "cfg.json";
  std::ofstream(cfg) << R"({"trajectory": "nowhere/ghost.csv"})";
  const Result r = cli("run " + cfg.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("ghost.csv"), std::string::npos) << r.out;
}

TEST_F(CliTest, UnknownMethodListsValidNames) {
  const Result r = cli("run " + config() + " --method zem");
  EXPECT_EQ(r.code, 2);
  for (const char* m : {"pp", "pn", "lpn", "gpn", "epn", "mpc"}) EXPECT_NE(r.out.find(m), std::string::npos);
}

TEST_F(CliTest, BadConfigAndUsageErrors) {
  const fs::path cfg = dir_ / "cfg.json";
  std::ofstream(cfg) << R"({"trajectory": "x.csv", "colour": 1})";
  const Result r = cli("run " + cfg.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("colour"), std::string::npos);
  EXPECT_EQ(cli("run").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
}

TEST_F(CliTest, BatchOnMiniSetPopulatesEveryField) {
  const Result r = cli("batch " + config() + " --methods lpn,epn --trajectories " + minis() +
                       " --starts 5 --timing --out " + dir_.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto t = nlohmann::json::parse(slurp(dir_ / "table.json"));
  ASSERT_EQ(t["rows"].size(), 2u);
  for (const auto& row : t["rows"]) {
    EXPECT_EQ(row["trajectories"], 10);
    EXPECT_EQ(row["runs"], 50);
    for (const char* f : {"pct_trajectories_with_interception", "mean_interceptions_per_trajectory",
                          "mean_time_to_first", "mean_accuracy_all", "mean_accuracy_first",
                          "mean_compute_time", "e_x", "e_p", "e_v"}) {
      EXPECT_TRUE(row[f].is_number()) << f;
    }
  }
  EXPECT_TRUE(fs::exists(dir_ / "table.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "runs" / "epn__random_0__s4.json"));
  EXPECT_NE(r.out.find("method,trajectories"), std::string::npos);
}

TEST_F(CliTest, BatchJobsDoNotChangeOutput) {
  const std::string common = "batch " + config() + " --methods epn,mpc --trajectories " + minis() + " --starts 1";
  ASSERT_EQ(cli(common + " --jobs 1 --out " + (dir_ / "j1").string()).code, 0);
  ASSERT_EQ(cli(common + " --jobs 8 --out " + (dir_ / "j8").string()).code, 0);
  EXPECT_EQ(slurp(dir_ / "j1" / "table.json"), slurp(dir_ / "j8" / "table.json"));
  for (const auto& e : fs::directory_iterator(dir_ / "j1" / "runs")) {
    EXPECT_EQ(slurp(e.path()), slurp(dir_ / "j8" / "runs" / e.path().filename()));
  }
}

TEST_F(CliTest, BatchUsageErrors) {
  EXPECT_EQ(cli("batch " + config() + " --starts 0 --out " + dir_.string()).code, 2);
  const Result r = cli("batch " + config() + " --trajectories '/nonexistent/*.csv' --out " + dir_.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("/nonexistent/*.csv"), std::string::npos);
}

TEST_F(CliTest, GenTrajLemniscateStats) {
  const Result r = cli("gen-traj --kind lemniscate --width 16 --length 40 --speed 5.0 --out " +
                       (dir_ / "l.csv").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto pos = r.out.find("max_accel ");
  ASSERT_NE(pos, std::string::npos);
  const double max_accel = std::stod(r.out.substr(pos + 10));
  EXPECT_NEAR(max_accel, 4.9, 1.0);
}

TEST_F(CliTest, GenTrajRandomIsReproducible) {
  ASSERT_EQ(cli("gen-traj --kind random --seed 3 --duration 20 --out " + (dir_ / "a.csv").string()).code, 0);
  ASSERT_EQ(cli("gen-traj --kind random --seed 3 --duration 20 --out " + (dir_ / "b.csv").string()).code, 0);
  EXPECT_EQ(slurp(dir_ / "a.csv"), slurp(dir_ / "b.csv"));
  const Result s = cli("traj-stats " + (dir_ / "a.csv").string());
  EXPECT_EQ(s.code, 0);
  EXPECT_NE(s.out.find("mean_speed"), std::string::npos);
}

TEST_F(CliTest, GenTrajRejectsBadSpecs) {
  EXPECT_EQ(cli("gen-traj --kind lemniscate --speed -1 --out " + (dir_ / "x.csv").string()).code, 2);
  EXPECT_EQ(cli("gen-traj --kind spiral --out " + (dir_ / "x.csv").string()).code, 2);
  const Result r = cli("gen-traj --kind random --seed 1 --max-accel 0.001 --duration 10 --out " +
                       (dir_ / "x.csv").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("rejections"), std::string::npos);
}

TEST_F(CliTest, TuneGuidanceWritesGridAndBest) {
  const Result r = cli("tune-guidance --method lpn --trajectories '" +
                       data("trajectories/random_0.csv") + "' --starts 1 --points 3 --out " + dir_.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const std::string grid = slurp(dir_ / "grid.txt");
  EXPECT_EQ(std::count(grid.begin(), grid.end(), '\n'), 4);
  const auto best = nlohmann::json::parse(slurp(dir_ / "best.json"));
  EXPECT_TRUE(best["best"].contains("G"));
  EXPECT_EQ(best["grid_points"], 3);
}

TEST_F(CliTest, TuneFilterWritesParameters) {
  const Result r = cli("tune-filter " + config() + " --kind cv --cov-mode reported --logs 1 --max-iter 2 --out " +
                       (dir_ / "f.json").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(slurp(dir_ / "f.json"));
  EXPECT_TRUE(j["params"].is_object()) << j.dump();
  EXPECT_LE(j["e_x"].get<double>(), j["initial_e_x"].get<double>());
  EXPECT_EQ(cli("tune-filter " + config() + " --kind ukf").code, 2);
}
