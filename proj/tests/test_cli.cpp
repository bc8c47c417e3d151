#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

const std::string kCli = QKDCS_CLI_PATH;
const std::string kDir = QKDCS_CONFIG_DIR;

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  Run r;
  FILE* pipe = popen((kCli + " " + args + " 2>/dev/null").c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::filesystem::path scratch_dir(const char* name) {
  auto d = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

TEST(Cli, CheckPasses) {
  const auto r = run("check");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST(Cli, SweepWritesCsv) {
  const auto dir = scratch_dir("qkdcs_cli_sweep");
  const auto csv = dir / "out.csv";
  const auto r = run("sweep -c " + kDir + "/coarse_default.json --start 0 --stop 20 --step 10 -o " + csv.string());
  EXPECT_EQ(r.code, 0);
  std::ifstream in(csv);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 4);
}

TEST(Cli, SweepToStdout) {
  const auto r = run("sweep --start 0 --stop 0 --step 1 -m candidate");
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(r.out.starts_with("distance_km,"));
}

TEST(Cli, BadConfigExitsWithTwo) {
  const auto dir = scratch_dir("qkdcs_cli_bad");
  const auto bad = dir / "bad.json";
  std::ofstream(bad) << R"({"channel": {"eta_det": 2}})";
  EXPECT_EQ(run("sweep -c " + bad.string()).code, 2);
  EXPECT_EQ(run("sweep -c " + (dir / "none.json").string()).code, 2);
  EXPECT_EQ(run("sweep -m fast --stop 0").code, 2);
}

TEST(Cli, SolveWritesPrograms) {
  const auto dir = scratch_dir("qkdcs_cli_solve");
  const auto r = run("solve -c " + kDir + "/coarse_default.json -d 30 --lp-dir " + dir.string());
  EXPECT_EQ(r.code, 0);
  for (const char* p : {"P1.lp", "P2.lp", "P3.lp"}) EXPECT_TRUE(std::filesystem::exists(dir / p)) << p;
  EXPECT_NE(r.out.find("candidate-refs bound"), std::string::npos);
}

TEST(Cli, UsageErrors) {
  EXPECT_NE(run("").code, 0);
  EXPECT_NE(run("frobnicate").code, 0);
}

}  // namespace
