#include "ipvs/bench.hpp"

#include "ipvs/errors.hpp"
#include "ipvs/io.hpp"
#include "ipvs/parallel.hpp"
#include "ipvs/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

namespace ipvs {

namespace {

constexpr std::uint64_t kBenchTag = 0x62656e6368;  // "bench"
constexpr std::uint64_t kLawTag = 0x6c6177;        // "law"
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

BenchRow row_from(const InsertionOutcome& out, ComponentStyle style, InsertMode mode, int index,
                  std::uint64_t seed) {
  BenchRow row;
  row.style = style;
  row.mode = mode;
  row.index = index;
  row.seed = seed;
  row.retrospective_error = out.retrospective_error;
  row.post_servo_error = out.post_servo_retrospective_error;
  row.true_initial_error = out.true_initial_error;
  row.time_s = out.simulated_time;
  row.attempts = out.attempts;
  row.success = out.success;
  row.servo_residuals = out.servo_residuals;
  return row;
}

ModeStats stats_of(const std::vector<const BenchRow*>& rows) {
  ModeStats s;
  double total = 0.0;
  for (const auto* r : rows) {
    ++s.count;
    total += r->time_s;
    if (r->success) {
      ++s.successes;
      if (r->attempts == 1) ++s.first_attempt;
    }
  }
  s.mean_time_s = s.count > 0 ? total / s.count : kNaN;
  return s;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

template <typename T>
T parse_number(std::string_view field) {
  T value{};
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw Error(ErrorKind::FormatError, "bad number '" + std::string(field) + "' in scatter.csv");
  }
  return value;
}

nlohmann::json stats_json(const ModeStats& s) {
  return {{"count", s.count},
          {"successes", s.successes},
          {"first_attempt_successes", s.first_attempt},
          {"mean_time_s", s.mean_time_s}};
}

}  // namespace

double BenchConfig::tolerance_for(ComponentStyle style) const {
  const auto it = style_tolerance.find(style);
  return it == style_tolerance.end() ? tolerance : it->second;
}

void BenchConfig::validate() const {
  if (insertions_per_style < 1) throw Error(ErrorKind::InvalidConfig, "insertions_per_style must be >= 1");
  if (!(error_disc_radius >= 0.0)) throw Error(ErrorKind::InvalidRadius, "error disc radius must be >= 0");
  if (!(tolerance > 0.0)) throw Error(ErrorKind::InvalidTolerance, "tolerance must be > 0");
  if (n_iters < 1) throw Error(ErrorKind::InvalidConfig, "n_iters must be >= 1");
  timing.validate();
}

WorldConfig bench_world(const BenchConfig& cfg, ComponentStyle style, int index) {
  WorldConfig wc = cfg.world;
  wc.component_style = style;
  wc.tolerance = cfg.tolerance_for(style);
  wc.extra_error_radius = cfg.error_disc_radius;
  wc.seed = derive_seed(cfg.seed, kBenchTag + static_cast<std::uint64_t>(style),
                        static_cast<std::uint64_t>(index));
  return wc;
}

BenchReport run_benchmark(const BenchConfig& cfg, const DeployedModels& models, int jobs) {
  cfg.validate();
  struct Job {
    ComponentStyle style;
    InsertMode mode;
    int index;
  };
  std::vector<Job> work;
  for (const auto style : cfg.styles) {
    for (const auto mode : cfg.modes) {
      if (mode == InsertMode::ServoThenSpiral && (!models.count(style) || models.at(style).empty())) {
        throw Error(ErrorKind::ModelsNotDeployed,
                    "no deployed models for style " + std::string(to_string(style)));
      }
      for (int i = 0; i < cfg.insertions_per_style; ++i) work.push_back({style, mode, i});
    }
  }
  std::map<ComponentStyle, SearchPattern> patterns;
  for (const auto style : cfg.styles) {
    patterns[style] = generate_pattern(cfg.tolerance_for(style), cfg.pattern_radius);
  }

  std::vector<BenchRow> rows(work.size());
  parallel_for(work.size(), jobs, [&](std::size_t k) {
    const Job& job = work[k];
    const WorldConfig wc = bench_world(cfg, job.style, job.index);
    WorldState world = new_world(wc);
    ServoConfig servo;
    servo.n_iters = cfg.n_iters;
    servo.clamp_mm = cfg.clamp_mm;
    servo.timing = cfg.timing;
    if (job.mode == InsertMode::ServoThenSpiral) servo.models = models.at(job.style);
    const InsertionOutcome out = insert(world, job.mode, servo, patterns.at(job.style), cfg.timing);
    rows[k] = row_from(out, job.style, job.mode, job.index, wc.seed);
  });
  return aggregate(std::move(rows));
}

BenchReport aggregate(std::vector<BenchRow> rows) {
  BenchReport report;
  report.rows = std::move(rows);
  std::vector<ComponentStyle> order;
  for (const auto& r : report.rows) {
    if (std::find(order.begin(), order.end(), r.style) == order.end()) order.push_back(r.style);
  }
  auto select = [&](std::optional<ComponentStyle> style, InsertMode mode) {
    std::vector<const BenchRow*> out;
    for (const auto& r : report.rows) {
      if (r.mode == mode && (!style || r.style == *style)) out.push_back(&r);
    }
    return out;
  };
  for (const auto style : order) {
    StyleSummary s;
    s.style = style;
    s.vs = stats_of(select(style, InsertMode::ServoThenSpiral));
    s.novs = stats_of(select(style, InsertMode::SpiralOnly));
    s.speedup = s.novs.mean_time_s / s.vs.mean_time_s;
    report.styles.push_back(s);
  }
  report.vs = stats_of(select(std::nullopt, InsertMode::ServoThenSpiral));
  report.novs = stats_of(select(std::nullopt, InsertMode::SpiralOnly));
  report.speedup = report.novs.mean_time_s / report.vs.mean_time_s;

  double post_sum = 0.0;
  int post_n = 0;
  std::vector<double> vs_err, vs_time, novs_err, novs_time;
  for (const auto& r : report.rows) {
    if (!r.success) continue;
    if (r.mode == InsertMode::ServoThenSpiral) {
      post_sum += r.post_servo_error;
      ++post_n;
      vs_err.push_back(r.retrospective_error);
      vs_time.push_back(r.time_s);
    } else {
      novs_err.push_back(r.retrospective_error);
      novs_time.push_back(r.time_s);
    }
  }
  report.mean_post_servo_error = post_n > 0 ? post_sum / post_n : kNaN;
  report.vs_time_error_correlation = pearson(vs_err, vs_time);
  report.novs_time_error_correlation = pearson(novs_err, novs_time);
  return report;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return kNaN;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  // A constant series carries no trend.
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

QuadraticFit fit_quadratic_law(const std::vector<BenchRow>& rows) {
  std::vector<double> lx, ly;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& r : rows) {
    if (r.mode != InsertMode::SpiralOnly || !r.success) continue;
    if (!(r.retrospective_error > 0.0) || !(r.time_s > 0.0)) continue;
    lx.push_back(std::log(r.retrospective_error));
    ly.push_back(std::log(r.time_s));
    lo = std::min(lo, r.retrospective_error);
    hi = std::max(hi, r.retrospective_error);
  }
  if (lx.size() < 10) {
    throw Error(ErrorKind::InsufficientData,
                "need at least 10 successful spiral-only rows, have " + std::to_string(lx.size()));
  }
  if (hi < 3.0 * lo) throw Error(ErrorKind::InsufficientData, "error range spans less than 3x");

  const auto n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  QuadraticFit fit;
  fit.n = static_cast<int>(lx.size());
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

std::vector<BenchRow> spiral_law_rows(const std::vector<double>& error_levels, int seeds_per_level,
                                      double tolerance, double pattern_radius,
                                      const WorldConfig& world, const TimingModel& timing,
                                      std::uint64_t seed, int jobs) {
  const SearchPattern pattern = generate_pattern(tolerance, pattern_radius);
  const std::size_t per_level = static_cast<std::size_t>(std::max(seeds_per_level, 0));
  std::vector<BenchRow> rows(error_levels.size() * per_level);
  parallel_for(rows.size(), jobs, [&](std::size_t k) {
    const double level = error_levels[k / per_level];
    WorldConfig wc = world;
    wc.tolerance = tolerance;
    wc.extra_error_radius = 0.0;
    wc.seed = derive_seed(seed, kLawTag, k);
    WorldState w = new_world(wc);
    std::mt19937_64 rng(derive_seed(wc.seed, kLawTag));
    const double theta = 2.0 * std::numbers::pi * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    w.extra_error = level * Vec2(std::cos(theta), std::sin(theta));
    w.tcp = w.start_tcp();
    w.trajectory.assign(1, w.tcp);
    ServoConfig unused;
    const InsertionOutcome out = insert(w, InsertMode::SpiralOnly, unused, pattern, timing);
    rows[k] = row_from(out, wc.component_style, InsertMode::SpiralOnly, static_cast<int>(k), wc.seed);
  });
  return rows;
}

std::string table_csv(const BenchReport& report) {
  std::string out = "style,vs_mean_s,novs_mean_s,speedup\n";
  for (const auto& s : report.styles) {
    out += std::string(to_string(s.style)) + "," + format_double(s.vs.mean_time_s) + "," +
           format_double(s.novs.mean_time_s) + "," + format_double(s.speedup) + "\n";
  }
  if (!report.styles.empty()) {
    out += "avg," + format_double(report.vs.mean_time_s) + "," + format_double(report.novs.mean_time_s) +
           "," + format_double(report.speedup) + "\n";
  }
  return out;
}

std::string scatter_csv(const std::vector<BenchRow>& rows) {
  std::string out =
      "style,mode,index,seed,error_mm,time_s,attempts,success,post_servo_error_mm,true_initial_error_mm\n";
  for (const auto& r : rows) {
    out += std::string(to_string(r.style)) + "," + std::string(to_string(r.mode)) + "," +
           std::to_string(r.index) + "," + std::to_string(r.seed) + "," +
           format_double(r.retrospective_error) + "," + format_double(r.time_s) + "," +
           std::to_string(r.attempts) + "," + (r.success ? "1" : "0") + "," +
           format_double(r.post_servo_error) + "," + format_double(r.true_initial_error) + "\n";
  }
  return out;
}

std::vector<BenchRow> parse_scatter_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::FormatError, "scatter.csv is empty");
  std::vector<BenchRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1)) {
      f.push_back(rest.substr(0, pos));
    }
    f.push_back(rest);
    if (f.size() != 10) throw Error(ErrorKind::FormatError, "scatter.csv row needs 10 fields");
    BenchRow r;
    r.style = parse_style(f[0]);
    r.mode = parse_insert_mode(f[1]);
    r.index = parse_number<int>(f[2]);
    r.seed = parse_number<std::uint64_t>(f[3]);
    r.retrospective_error = parse_number<double>(f[4]);
    r.time_s = parse_number<double>(f[5]);
    r.attempts = parse_number<int>(f[6]);
    r.success = parse_number<int>(f[7]) != 0;
    r.post_servo_error = parse_number<double>(f[8]);
    r.true_initial_error = parse_number<double>(f[9]);
    rows.push_back(r);
  }
  return rows;
}

std::string summary_json(const BenchReport& report, const std::optional<QuadraticFit>& fit) {
  nlohmann::json j;
  j["rows"] = report.rows.size();
  j["styles"] = nlohmann::json::array();
  for (const auto& s : report.styles) {
    j["styles"].push_back({{"style", std::string(to_string(s.style))},
                           {"vs", stats_json(s.vs)},
                           {"novs", stats_json(s.novs)},
                           {"speedup", s.speedup}});
  }
  j["overall"] = {{"vs", stats_json(report.vs)},
                  {"novs", stats_json(report.novs)},
                  {"speedup", report.speedup},
                  {"mean_post_servo_error_mm", report.mean_post_servo_error},
                  {"vs_time_error_correlation", report.vs_time_error_correlation},
                  {"novs_time_error_correlation", report.novs_time_error_correlation}};
  if (fit) {
    j["quadratic_fit"] = {{"slope", fit->slope}, {"intercept", fit->intercept}, {"r2", fit->r2}, {"n", fit->n}};
  } else {
    j["quadratic_fit"] = nullptr;
  }
  return j.dump(2) + "\n";
}

std::string scatter_svg(const std::vector<BenchRow>& rows) {
  constexpr double width = 640.0, height = 420.0;
  constexpr double left = 70.0, right = 20.0, top = 20.0, bottom = 50.0;
  double max_err = 0.0, min_t = std::numeric_limits<double>::infinity(), max_t = 0.0;
  for (const auto& r : rows) {
    if (!r.success) continue;
    max_err = std::max(max_err, r.retrospective_error);
    min_t = std::min(min_t, r.time_s);
    max_t = std::max(max_t, r.time_s);
  }
  if (!(max_err > 0.0)) max_err = 1.0;
  const double lo_dec = max_t > 0.0 ? std::floor(std::log10(min_t)) : -1.0;
  const double hi_dec = max_t > 0.0 ? std::max(std::ceil(std::log10(max_t)), lo_dec + 1.0) : 2.0;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  auto sx = [&](double e) { return left + plot_w * e / max_err; };
  auto sy = [&](double t) { return top + plot_h * (hi_dec - std::log10(t)) / (hi_dec - lo_dec); };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
                  "viewBox=\"0 0 640 420\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
  s += "<line x1=\"" + fixed(left, 2) + "\" y1=\"" + fixed(top + plot_h, 2) + "\" x2=\"" +
       fixed(left + plot_w, 2) + "\" y2=\"" + fixed(top + plot_h, 2) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + fixed(left, 2) + "\" y1=\"" + fixed(top, 2) + "\" x2=\"" + fixed(left, 2) +
       "\" y2=\"" + fixed(top + plot_h, 2) + "\" stroke=\"black\"/>\n";
  for (double d = lo_dec; d <= hi_dec + 1e-9; d += 1.0) {
    const double y = sy(std::pow(10.0, d));
    s += "<line x1=\"" + fixed(left - 4, 2) + "\" y1=\"" + fixed(y, 2) + "\" x2=\"" + fixed(left, 2) +
         "\" y2=\"" + fixed(y, 2) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + fixed(left - 8, 2) + "\" y=\"" + fixed(y + 4, 2) + "\" text-anchor=\"end\">1e" +
         fixed(d, 0) + "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double e = max_err * i / 4.0;
    s += "<text x=\"" + fixed(sx(e), 2) + "\" y=\"" + fixed(top + plot_h + 18, 2) +
         "\" text-anchor=\"middle\">" + fixed(e, 2) + "</text>\n";
  }
  s += "<text x=\"" + fixed(left + plot_w / 2, 2) + "\" y=\"" + fixed(height - 10, 2) +
       "\" text-anchor=\"middle\">retrospective error [mm]</text>\n";
  s += "<text x=\"16\" y=\"" + fixed(top + plot_h / 2, 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       fixed(top + plot_h / 2, 2) + ")\">insertion time [s] (log)</text>\n";
  for (const auto& r : rows) {
    if (!r.success) continue;
    const char* color = r.mode == InsertMode::ServoThenSpiral ? "#1f77b4" : "#ff7f0e";
    s += "<circle cx=\"" + fixed(sx(r.retrospective_error), 2) + "\" cy=\"" + fixed(sy(r.time_s), 2) +
         "\" r=\"3\" fill=\"" + color + "\"/>\n";
  }
  s += "<text x=\"" + fixed(left + 10, 2) + "\" y=\"" + fixed(top + 12, 2) +
       "\" fill=\"#1f77b4\">vs</text>\n";
  s += "<text x=\"" + fixed(left + 40, 2) + "\" y=\"" + fixed(top + 12, 2) +
       "\" fill=\"#ff7f0e\">novs</text>\n";
  s += "</svg>\n";
  return s;
}

void emit_report(const BenchReport& report, const std::filesystem::path& dir,
                 const std::optional<QuadraticFit>& fit) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create '" + dir.string() + "': " + ec.message());
  write_file(dir / "table.csv", table_csv(report));
  write_file(dir / "scatter.csv", scatter_csv(report.rows));
  write_file(dir / "summary.json", summary_json(report, fit));
  write_file(dir / "scatter.svg", scatter_svg(report.rows));
}

}  // namespace ipvs
