#include "ipvs/cli.hpp"
#include "ipvs/io.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

using namespace ipvs;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ipvs_test_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "ipvs");
  return run_cli(args);
}

// A configuration small enough for unit tests.
fs::path small_config() {
  static const fs::path path = [] {
    nlohmann::json j = read_json(fs::path(IPVS_SOURCE_DIR) / "configs" / "default.json");
    j["collection"]["n_insertions"] = 4;
    j["collection"]["train_insertions"] = 3;
    j["collection"]["samples_per_insertion"] = 40;
    j["bench"]["styles"] = {"PH", "LED"};
    j["bench"]["insertions_per_style"] = 3;
    j["gate"]["max_val_mae_mm"] = 1.0;
    const fs::path p = fs::temp_directory_path() / "ipvs_test_cli_small.json";
    write_file(p, j.dump(2));
    return p;
  }();
  return path;
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), root).string();
    std::string body = read_file(entry.path());
    if (rel == "manifest.json") {
      nlohmann::json m = nlohmann::json::parse(body);
      m.erase("created_at");
      m.erase("args");
      m.erase("jobs");
      body = m.dump();
    }
    out[rel] = body;
  }
  return out;
}

}  // namespace

TEST(Cli, PatternWritesCsv) {
  const fs::path out = scratch_dir("pattern");
  ASSERT_EQ(run({"pattern", "--tolerance", "0.1", "--radius", "1.0", "--out", out.string()}), 0);
  const std::string csv = read_file(out / "pattern.csv");
  EXPECT_EQ(csv.rfind("index,dx_mm,dy_mm\n0,0,0\n", 0), 0u);
  EXPECT_GE(std::count(csv.begin(), csv.end(), '\n'), 1 + 7);
  EXPECT_TRUE(fs::exists(out / "manifest.json"));
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({"frobnicate"}), 2);
  EXPECT_EQ(run({}), 2);
  EXPECT_EQ(run({"bench", "--out", scratch_dir("nocfg").string()}), 2);
  EXPECT_EQ(run({"pattern", "--tolerance", "abc"}), 2);
  EXPECT_EQ(run({"train", "--out", scratch_dir("nodata").string()}), 2);
}

TEST(Cli, DomainErrorsExitOne) {
  EXPECT_EQ(run({"pattern", "--tolerance", "-0.1", "--out", scratch_dir("neg").string()}), 1);
  EXPECT_EQ(run({"train", "--dataset", "/nonexistent/ipvs", "--out", scratch_dir("missing").string()}), 1);
  const fs::path bad = fs::temp_directory_path() / "ipvs_test_cli_bad.json";
  write_file(bad, R"({"world": {"tolerence": 0.1}})");
  EXPECT_EQ(run({"collect", "--config", bad.string(), "--out", scratch_dir("badcfg").string()}), 1);
}

TEST(Cli, SimulateWritesArtifacts) {
  const fs::path out = scratch_dir("simulate");
  ASSERT_EQ(run({"simulate", "--style", "DSUB", "--index", "2", "--trace", "--out", out.string()}), 0);
  for (const char* f : {"manifest.json", "world.json", "cam0.pgm", "cam1.pgm", "outcome.json", "trajectory.csv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
}

TEST(Cli, LifecycleThroughFiles) {
  const fs::path root = scratch_dir("lifecycle");
  const std::string cfg = small_config().string();
  ASSERT_EQ(run({"collect", "--config", cfg, "--out", (root / "c").string()}), 0);
  ASSERT_TRUE(fs::exists(root / "c" / "dataset" / "meta.json"));
  ASSERT_EQ(run({"train", "--config", cfg, "--dataset", (root / "c" / "dataset").string(), "--out",
                 (root / "t").string()}),
            0);
  ASSERT_TRUE(fs::exists(root / "t" / "reports" / "train.json"));
  ASSERT_EQ(run({"evaluate", "--dataset", (root / "c" / "dataset").string(), "--models",
                 (root / "t" / "models").string(), "--out", (root / "e").string()}),
            0);
  ASSERT_EQ(run({"servo", "--config", cfg, "--models", (root / "t" / "models").string(), "--trace",
                 "--out", (root / "s").string()}),
            0);
  EXPECT_TRUE(fs::exists(root / "s" / "reports" / "trace.csv"));
  ASSERT_EQ(run({"servo", "--oracle-sigma", "0", "--out", (root / "o").string()}), 0);
  const nlohmann::json outcome = read_json(root / "o" / "outcome.json");
  EXPECT_EQ(outcome["attempts"], 1);
}

TEST(Cli, BenchIndependentOfJobsAndReportReproduces) {
  const std::string cfg = small_config().string();
  const fs::path a = scratch_dir("bench_a"), b = scratch_dir("bench_b");
  ASSERT_EQ(run({"bench", "--config", cfg, "--jobs", "1", "--out", a.string()}), 0);
  ASSERT_EQ(run({"bench", "--config", cfg, "--jobs", "4", "--out", b.string()}), 0);
  const auto ta = tree_contents(a), tb = tree_contents(b);
  ASSERT_EQ(ta.size(), tb.size());
  for (const auto& [name, body] : ta) {
    ASSERT_TRUE(tb.count(name)) << name;
    EXPECT_EQ(body, tb.at(name)) << name;
  }
  for (const char* f : {"table.csv", "scatter.csv", "summary.json", "scatter.svg"}) {
    EXPECT_TRUE(ta.count(f)) << f;
  }

  const fs::path r = scratch_dir("report");
  ASSERT_EQ(run({"report", "--in", a.string(), "--out", r.string()}), 0);
  EXPECT_EQ(read_file(r / "table.csv"), read_file(a / "table.csv"));
  EXPECT_EQ(read_file(r / "scatter.csv"), read_file(a / "scatter.csv"));
}

TEST(Cli, SeedFlagChangesResults) {
  const std::string cfg = small_config().string();
  const fs::path a = scratch_dir("seed_a"), b = scratch_dir("seed_b");
  ASSERT_EQ(run({"collect", "--config", cfg, "--seed", "1", "--out", a.string()}), 0);
  ASSERT_EQ(run({"collect", "--config", cfg, "--seed", "2", "--out", b.string()}), 0);
  EXPECT_NE(read_file(a / "dataset" / "images.bin"), read_file(b / "dataset" / "images.bin"));
  const nlohmann::json manifest = read_json(a / "manifest.json");
  EXPECT_EQ(manifest["config"]["seed"], 1);
}

TEST(Cli, EnvironmentSuppliesOutDirectory) {
  const fs::path out = scratch_dir("env");
  ::setenv("IPVS_OUT", out.string().c_str(), 1);
  const int code = run({"pattern"});
  ::unsetenv("IPVS_OUT");
  ASSERT_EQ(code, 0);
  EXPECT_TRUE(fs::exists(out / "pattern.csv"));
}
