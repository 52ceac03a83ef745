#pragma once

// Benchmark harness: servo-then-spiral against spiral-only insertions over
// random initial errors, with the per-style time table, the time versus
// retrospective error scatter and the quadratic time law fit.

#include "ipvs/perception.hpp"
#include "ipvs/pipeline.hpp"
#include "ipvs/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ipvs {

struct BenchConfig {
  std::vector<ComponentStyle> styles{kAllStyles.begin(), kAllStyles.end()};
  int insertions_per_style = 10;  // per mode
  double error_disc_radius = 1.0;  // mm
  double tolerance = 0.1;          // mm
  std::map<ComponentStyle, double> style_tolerance;  // per-style override
  double pattern_radius = 1.5;     // mm, search pattern extent
  int n_iters = 3;
  double clamp_mm = 2.0;
  std::uint64_t seed = 0;
  TimingModel timing;
  std::vector<InsertMode> modes{InsertMode::ServoThenSpiral, InsertMode::SpiralOnly};
  // Cell geometry and uncertainties; style, tolerance, disc radius and seed
  // are set per row.
  WorldConfig world;

  double tolerance_for(ComponentStyle style) const;
  void validate() const;
};

struct BenchRow {
  ComponentStyle style = ComponentStyle::PH;
  InsertMode mode = InsertMode::SpiralOnly;
  int index = 0;
  std::uint64_t seed = 0;
  double retrospective_error = 0.0;        // mm, NaN on failure
  double post_servo_error = 0.0;           // mm, NaN without servoing or on failure
  double true_initial_error = 0.0;         // mm
  double time_s = 0.0;
  int attempts = 0;
  bool success = false;
  std::vector<double> servo_residuals;  // mm, trace only, not in scatter.csv
};

struct ModeStats {
  int count = 0;
  int successes = 0;
  int first_attempt = 0;  // successful at the first spiral attempt
  double mean_time_s = 0.0;  // NaN when count == 0
};

struct StyleSummary {
  ComponentStyle style = ComponentStyle::PH;
  ModeStats vs;
  ModeStats novs;
  double speedup = 0.0;  // novs mean / vs mean
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::vector<StyleSummary> styles;
  ModeStats vs;
  ModeStats novs;
  double speedup = 0.0;
  double mean_post_servo_error = 0.0;  // mm, over successful servo rows
  double vs_time_error_correlation = 0.0;
  double novs_time_error_correlation = 0.0;
};

// Models per style, one per camera or one shared.
using DeployedModels = std::map<ComponentStyle, std::vector<RegressorModel>>;

// World of row (style, index); the same in both modes.
WorldConfig bench_world(const BenchConfig& cfg, ComponentStyle style, int index);

// Worlds are shared between modes: row (style, i) uses the same seed in both.
// Throws ModelsNotDeployed when a servo row has no models.
BenchReport run_benchmark(const BenchConfig& cfg, const DeployedModels& models, int jobs = 1);

// Recomputes every aggregate from the rows, in row order.
BenchReport aggregate(std::vector<BenchRow> rows);

struct QuadraticFit {
  double slope = 0.0;
  double intercept = 0.0;  // log(time) at log(error) = 0
  double r2 = 0.0;
  int n = 0;
};

// Least-squares line through (log error, log time) of the successful
// spiral-only rows. Throws InsufficientData for fewer than 10 rows or an
// error range narrower than 3x.
QuadraticFit fit_quadratic_law(const std::vector<BenchRow>& rows);

// Spiral-only rows with the initial error magnitude fixed per level and a
// random direction.
std::vector<BenchRow> spiral_law_rows(const std::vector<double>& error_levels, int seeds_per_level,
                                      double tolerance, double pattern_radius,
                                      const WorldConfig& world, const TimingModel& timing,
                                      std::uint64_t seed, int jobs = 1);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

// table.csv, scatter.csv, summary.json, scatter.svg. Throws IoError.
void emit_report(const BenchReport& report, const std::filesystem::path& dir,
                 const std::optional<QuadraticFit>& fit = std::nullopt);

std::string table_csv(const BenchReport& report);
std::string scatter_csv(const std::vector<BenchRow>& rows);
std::vector<BenchRow> parse_scatter_csv(const std::string& text);
std::string summary_json(const BenchReport& report, const std::optional<QuadraticFit>& fit);
std::string scatter_svg(const std::vector<BenchRow>& rows);

}  // namespace ipvs
