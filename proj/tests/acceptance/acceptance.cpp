// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "ipvs/bench.hpp"
#include "ipvs/cli.hpp"
#include "ipvs/geometry.hpp"
#include "ipvs/io.hpp"
#include "ipvs/perception.hpp"
#include "ipvs/pipeline.hpp"
#include "ipvs/random.hpp"
#include "ipvs/search.hpp"
#include "ipvs/servoing.hpp"
#include "ipvs/sim.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

using namespace ipvs;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_jobs = 1;

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

Outcome reconstruction_oracle() {
  std::mt19937_64 rng(derive_seed(0, 1, 0));
  std::uniform_int_distribution<int> n_cams(2, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const Vec3 l = Vec3(gauss(rng), gauss(rng), gauss(rng)).normalized();
    const auto [a, b] = plane_basis(l);
    const double mag = 2.0 * std::sqrt(unit(rng));
    const double ang = 2.0 * std::numbers::pi * unit(rng);
    const Vec3 e = mag * (std::cos(ang) * a + std::sin(ang) * b);
    const int n = n_cams(rng);
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    std::vector<Vec3> dirs;
    std::vector<double> qs;
    for (int j = 0; j < n; ++j) {
      // Cameras spread in azimuth around the axis, elevated 20 to 70 degrees.
      const double az = phase + 2.0 * std::numbers::pi * (j + 0.3 * unit(rng)) / n;
      const double el = (20.0 + 50.0 * unit(rng)) * std::numbers::pi / 180.0;
      const Vec3 view =
          std::cos(el) * (std::cos(az) * a + std::sin(az) * b) + std::sin(el) * l;
      dirs.push_back(error_direction(l, view));
      qs.push_back(scalar_error(e, dirs.back()));
    }
    worst = std::max(worst, (reconstruct_error(dirs, qs).error - e).norm());
  }
  return {worst <= 1e-9, fmt("max |e_hat - e| = %.3g mm", worst)};
}

Outcome pattern_coverage() {
  double worst_ratio = 0.0;
  bool ok = true;
  for (double eps : {0.05, 0.1, 0.3}) {
    for (double radius : {0.5, 1.0, 2.0}) {
      const double cover = covering_radius(generate_pattern(eps, radius), radius, eps / 20.0);
      worst_ratio = std::max(worst_ratio, cover / eps);
      ok = ok && cover <= eps + 1e-12;
    }
  }
  return {ok, fmt("max covering radius / tolerance = %.4f", worst_ratio)};
}

struct LawRun {
  QuadraticFit fit;
  std::string csv;
  std::string json;
};

LawRun quadratic_law_run() {
  LawRun run;
  const std::vector<BenchRow> rows =
      spiral_law_rows({0.3, 0.6, 1.2}, 200, 0.05, 1.5, WorldConfig{}, TimingModel{}, 0, g_jobs);
  run.fit = fit_quadratic_law(rows);
  run.csv = scatter_csv(rows);
  run.json = nlohmann::json{{"slope", run.fit.slope},
                            {"intercept", run.fit.intercept},
                            {"r2", run.fit.r2},
                            {"n", run.fit.n}}
                 .dump(2);
  return run;
}

LawRun g_law;

Outcome quadratic_law() {
  g_law = quadratic_law_run();
  const double s = g_law.fit.slope;
  return {s >= 1.8 && s <= 2.2,
          fmt("slope %.4f", s) + fmt(" r2 %.4f", g_law.fit.r2) + " n " + std::to_string(g_law.fit.n)};
}

Outcome servo_exactness() {
  ServoConfig cfg;
  cfg.models = {RegressorModel::oracle(0.0), RegressorModel::oracle(0.0)};
  std::mt19937_64 rng(derive_seed(0, 4, 0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_first = 0.0;
  double worst_any = 0.0;
  bool three = true;
  for (int trial = 0; trial < 200; ++trial) {
    WorldConfig wc;
    wc.seed = derive_seed(0, 4, static_cast<std::uint64_t>(trial) + 1);
    WorldState w = new_world(wc);
    const double mag = cfg.clamp_mm * std::sqrt(unit(rng));
    const double ang = 2.0 * std::numbers::pi * unit(rng);
    const Vec3 aligned =
        w.hover_tcp() + in_plane(w.true_hole - peg_center(w, w.hover_tcp()), w.l());
    w.tcp = aligned - w.from_plane(mag * Vec2(std::cos(ang), std::sin(ang)));
    w.trajectory = {w.tcp};
    const ServoResult r = visual_servo(w, cfg);
    three = three && r.residuals.size() == 3;
    worst_first = std::max(worst_first, r.residuals.front());
    for (double res : r.residuals) worst_any = std::max(worst_any, res);
  }
  return {three && worst_first <= 1e-9 && worst_any <= 1e-9,
          fmt("max first-step residual %.3g mm", worst_first) +
              fmt(", max residual over 3 steps %.3g mm", worst_any)};
}

Dataset rendered_dataset(int insertions, int per_insertion, int first_id) {
  Dataset data;
  data.resolution = 64;
  std::mt19937_64 rng(derive_seed(0, 5, static_cast<std::uint64_t>(first_id)));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < insertions; ++i) {
    WorldConfig cfg;
    cfg.seed = derive_seed(0, 5, static_cast<std::uint64_t>(first_id + i) + 1000);
    const WorldState w = new_world(cfg);
    data.cameras = w.config.cameras;
    for (int k = 0; k < per_insertion; ++k) {
      const double r = std::sqrt(u(rng));
      const double t = 2.0 * std::numbers::pi * u(rng);
      const Vec3 tcp = w.true_hole - w.from_plane(w.grasp_offset) +
                       w.from_plane(r * Vec2(std::cos(t), std::sin(t))) - u(rng) * w.l();
      Sample s;
      s.observation = render(w, 0, tcp);
      s.label = *s.observation.truth_y;
      s.insertion_id = first_id + i;
      s.camera_index = 0;
      data.samples.push_back(std::move(s));
    }
  }
  return data;
}

Outcome gradient_correctness() {
  const Dataset train_d = rendered_dataset(4, 30, 0);
  const Dataset val_d = rendered_dataset(1, 30, 10);
  const Eigen::MatrixXd x = feature_matrix(train_d);
  const Eigen::VectorXd mean = x.colwise().mean();
  const Eigen::VectorXd sd =
      ((x.rowwise() - mean.transpose()).colwise().squaredNorm() / double(x.rows()))
          .cwiseSqrt()
          .cwiseMax(1e-2)
          .transpose();
  const RegressorModel fresh = init_mlp(64, {128, 128}, 7, mean, sd);
  const double at_init = gradient_check(fresh, val_d, 256, 1);
  TrainHyper hyper;
  hyper.kind = ModelKind::Mlp;
  hyper.hidden = {128, 128};
  hyper.learning_rate = 1e-3;
  hyper.max_epochs = 10;
  hyper.patience = 100;
  const TrainResult trained = train(train_d, val_d, hyper);
  const double after = gradient_check(trained.model, val_d, 256, 2);
  const bool ok = at_init <= 1e-4 && after <= 1e-4 && trained.report.epochs_run == 10;
  return {ok, fmt("max relative deviation at init %.3g", at_init) +
                  fmt(", after 10 epochs %.3g", after)};
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), root).generic_string();
    std::string body = read_file(entry.path());
    if (rel == "manifest.json") {
      // Wall-clock stamp and invocation details are not outputs of the run.
      nlohmann::json m = nlohmann::json::parse(body);
      m.erase("created_at");
      m.erase("args");
      m.erase("jobs");
      body = m.dump(2);
    }
    out[rel] = std::move(body);
  }
  return out;
}

fs::path g_config;
fs::path g_bench_dir;
int g_bench_status = -1;

int run_bench(const fs::path& out, int jobs) {
  fs::remove_all(out);
  return run_cli({"ipvs", "bench", "--config", g_config.string(), "--out", out.string(), "--jobs",
                  std::to_string(jobs)});
}

Outcome configure_deploys() {
  g_bench_status = run_bench(g_bench_dir, g_jobs);
  if (g_bench_status != 0) return {false, "bench exited with " + std::to_string(g_bench_status)};
  const nlohmann::json report = read_json(g_bench_dir / "reports" / "configure.json");
  int deployed = 0;
  double worst = 0.0;
  std::string failed;
  for (const char* style : {"PH", "LED", "C1", "DSUB", "C2"}) {
    if (!report.contains(style)) {
      failed += std::string(" ") + style + "(missing)";
      continue;
    }
    const auto& s = report[style];
    for (const auto& m : s["models"]) {
      worst = std::max(worst, m["val_metrics"]["mae_mm_at_nominal"].get<double>());
    }
    if (s["decision"] == "deploy") {
      ++deployed;
    } else {
      failed += std::string(" ") + style;
    }
  }
  return {deployed == 5, std::to_string(deployed) + "/5 deployed" +
                             fmt(", worst val MAE %.4f mm", worst) +
                             (failed.empty() ? "" : ", not deployed:" + failed)};
}

BenchReport bench_rows() {
  return aggregate(parse_scatter_csv(read_file(g_bench_dir / "scatter.csv")));
}

Outcome table_analog() {
  if (g_bench_status != 0) return {false, "bench did not complete"};
  const BenchReport r = bench_rows();
  const bool ok = r.speedup >= 10.0 && r.vs.successes == 50 && r.vs.count == 50 &&
                  r.novs.successes >= 45 && r.novs.count == 50;
  return {ok, fmt("speedup %.3f", r.speedup) + fmt(" (vs %.3f s", r.vs.mean_time_s) +
                  fmt(", novs %.3f s)", r.novs.mean_time_s) + ", vs success " +
                  std::to_string(r.vs.successes) + "/" + std::to_string(r.vs.count) +
                  ", novs success " + std::to_string(r.novs.successes) + "/" +
                  std::to_string(r.novs.count)};
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * double(i + j);
    i = j + 1;
  }
  return r;
}

Outcome scatter_analog() {
  if (g_bench_status != 0) return {false, "bench did not complete"};
  const BenchReport r = bench_rows();
  std::vector<double> err;
  std::vector<double> time;
  for (const auto& row : r.rows) {
    if (row.mode == InsertMode::SpiralOnly && row.success) {
      err.push_back(row.retrospective_error);
      time.push_back(row.time_s);
    }
  }
  // Increasing means a positive monotone association between error and time.
  const double novs_rank = pearson(ranks(err), ranks(time));
  const double first = r.vs.count > 0 ? double(r.vs.first_attempt) / r.vs.count : 0.0;
  const bool ok = std::abs(r.vs_time_error_correlation) <= 0.3 && novs_rank >= 0.5 &&
                  r.mean_post_servo_error <= 0.05 && first >= 0.7;
  return {ok, fmt("vs corr %.3f", r.vs_time_error_correlation) +
                  fmt(", novs rank corr %.3f", novs_rank) +
                  fmt(", mean post-servo error %.4f mm", r.mean_post_servo_error) +
                  ", first attempt " + std::to_string(r.vs.first_attempt) + "/" +
                  std::to_string(r.vs.count)};
}

Outcome determinism() {
  const LawRun law = quadratic_law_run();
  const bool law_same = law.csv == g_law.csv && law.json == g_law.json;
  // A different worker count also checks that threading does not leak into results.
  const fs::path again = g_bench_dir.parent_path() / "bench_rerun";
  const int status = run_bench(again, g_jobs == 1 ? 2 : 1);
  if (status != 0 || g_bench_status != 0) return {false, "bench rerun failed"};
  const auto a = tree_contents(g_bench_dir);
  const auto b = tree_contents(again);
  std::string differing;
  for (const auto& [name, body] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != body) differing += " " + name;
  }
  if (a.size() != b.size()) differing += " (file sets differ)";
  const bool ok = law_same && differing.empty();
  return {ok, std::string("quadratic law outputs ") + (law_same ? "identical" : "differ") +
                  ", bench " + std::to_string(a.size()) + " files " +
                  (differing.empty() ? "identical" : "differ:" + differing)};
}

}  // namespace

int main() {
  g_jobs = std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  g_config = fs::path(IPVS_SOURCE_DIR) / "configs" / "default.json";
  const fs::path scratch = fs::temp_directory_path() / "ipvs_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  g_bench_dir = scratch / "bench";

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 triangulation oracle equivalence", reconstruction_oracle},
      {"2 pattern coverage", pattern_coverage},
      {"3 quadratic time law", quadratic_law},
      {"4 oracle servoing exactness", servo_exactness},
      {"5 mlp gradient correctness", gradient_correctness},
      {"6 self-supervised configuration deploys all styles", configure_deploys},
      {"7 benchmark speedup and success", table_analog},
      {"8 time versus error scatter", scatter_analog},
      {"9 determinism", determinism},
  };

  int failures = 0;
  for (const auto& [name, check] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s criterion %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
