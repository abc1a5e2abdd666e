#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "gaussroots/experiments.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;

  std::string last_line() const {
    auto end = out.find_last_not_of('\n');
    if (end == std::string::npos) return "";
    auto start = out.rfind('\n', end);
    return out.substr(start == std::string::npos ? 0 : start + 1, end - (start == std::string::npos ? 0 : start + 1) + 1);
  }
  nlohmann::json manifest() const { return nlohmann::json::parse(last_line()); }
};

Run run(const std::string& args) {
  const std::string cmd = std::string(GAUSSROOTS_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, p)) r.out += buf;
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh(const std::string& name) {
  auto p = fs::temp_directory_path() / ("gaussroots_cli_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Cli, KacRiceGaussian) {
  const auto r = run("kac-rice --model gaussian");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("alpha = 0.318310"), std::string::npos);
  EXPECT_NEAR(r.manifest().at("alpha").get<double>(), 0.3183098861837907, 1e-15);
}

TEST(Cli, KacRiceOtherModels) {
  EXPECT_NE(run("kac-rice --model 'band(1)'").out.find("alpha = 0.183776"), std::string::npos);
  EXPECT_NE(run("kac-rice --model bilateral_exponential").out.find("alpha = 0.450158"), std::string::npos);
}

TEST(Cli, AssumptionABand) {
  const auto dir = fresh("asum");
  const auto r = run("assumption-a --model band --xstar 6.2831853 --kappa-prime 0.2 --out " + dir.string());
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("fails(r1prime)"), std::string::npos);
  EXPECT_EQ(r.manifest().at("verdict"), "fails(r1prime)");
  EXPECT_TRUE(fs::exists(dir / "assumption_a.csv"));
}

TEST(Cli, ZerosDeterministic) {
  const auto a = fresh("zeros_a"), b = fresh("zeros_b");
  const auto ra = run("zeros --model gaussian --T 100 --seed 7 --out " + a.string());
  const auto rb = run("zeros --model gaussian --T 100 --seed 7 --out " + b.string());
  ASSERT_EQ(ra.code, 0);
  ASSERT_EQ(rb.code, 0);
  EXPECT_EQ(slurp(a / "zeros.csv"), slurp(b / "zeros.csv"));
  EXPECT_EQ(ra.manifest().at("count"), rb.manifest().at("count"));
  EXPECT_GT(ra.manifest().at("count").get<int>(), 0);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("no-such-command").code, 2);
  EXPECT_EQ(run("kac-rice --no-such-flag").code, 2);
  EXPECT_EQ(run("kac-rice --model cauchy").code, 2);
  EXPECT_EQ(run("tail --replicates 10").code, 2);
  // bilateral covariance_kappa at 2κ_o = 1 diverges
  EXPECT_EQ(run("covariance --model bilateral --kappa-o 0.5 --out " + fresh("div").string()).code, 2);
  // runtime failure: manifest file missing
  EXPECT_EQ(run("tail --replay /nonexistent/tail.json --out " + fresh("rt").string()).code, 1);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, ManifestIsJsonForEverySubcommand) {
  const auto dir = fresh("all");
  const std::string o = " --out " + dir.string();
  for (const std::string args :
       {"kac-rice", "covariance --n 11", "assumption-a", "omega --horizon 30", "simulate --T 5 --strip-y 0.1",
        "zeros --T 10", "jensen --seeds 3 --T 4", "split --m 2 --m 4", "moments --reps 2000",
        "tail --T 10 --T 20 --eta 0.1 --replicates 100", "mean --T 10 --replicates 20"}) {
    const auto r = run(args + o);
    ASSERT_EQ(r.code, 0) << args;
    const auto m = r.manifest();
    EXPECT_EQ(m.at("version"), gaussroots::kVersion) << args;
    for (const auto& f : m.at("outputs")) EXPECT_TRUE(fs::exists(f.at("path").get<std::string>())) << args;
  }
}

TEST(Cli, ConfigOverridesFlags) {
  const auto dir = fresh("cfg");
  fs::create_directories(dir);
  std::ofstream(dir / "c.json") << R"({"T": [10, 20], "eta": [0.2], "replicates": 100, "seed": 3})";
  const auto r = run("tail --T 99 --replicates 5000 --config " + (dir / "c.json").string() + " --out " + dir.string());
  ASSERT_EQ(r.code, 0);
  const auto cfg = gaussroots::read_manifest((dir / "tail.json").string()).at("config");
  EXPECT_EQ(cfg.at("T"), nlohmann::json::array({10.0, 20.0}));
  EXPECT_EQ(cfg.at("replicates"), 100);
  EXPECT_EQ(cfg.at("seed"), 3);
  std::ofstream(dir / "bad.json") << R"({"no_such_key": 1})";
  EXPECT_EQ(run("tail --config " + (dir / "bad.json").string()).code, 2);
}

TEST(Cli, ReplayAcrossWorkers) {
  const auto a = fresh("rep_a");
  ASSERT_EQ(run("tail --T 10 --T 20 --eta 0.1 --replicates 150 --workers 1 --out " + a.string()).code, 0);
  for (int w : {2, 3}) {
    const auto b = fresh("rep_b" + std::to_string(w));
    ASSERT_EQ(run("tail --replay " + (a / "tail.json").string() + " --workers " + std::to_string(w) + " --out " +
                  b.string())
                  .code,
              0);
    EXPECT_EQ(slurp(a / "tail.csv"), slurp(b / "tail.csv"));
  }
}

TEST(Cli, OutputDirFromEnvironment) {
  const auto dir = fresh("env");
  const std::string cmd = "GAUSSROOTS_OUT=" + dir.string() + " " + GAUSSROOTS_CLI + " split --m 3 > /dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(dir / "split.csv"));
}
