#include "ipvs/cli.hpp"

#include "ipvs/bench.hpp"
#include "ipvs/config.hpp"
#include "ipvs/errors.hpp"
#include "ipvs/io.hpp"
#include "ipvs/pipeline.hpp"
#include "ipvs/search.hpp"
#include "ipvs/servoing.hpp"
#include "ipvs/sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace ipvs {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  bool trace = false;
};

struct Context {
  std::string subcommand;
  std::vector<std::string> args;
  RunConfig cfg;
  fs::path out;
  int jobs = 1;
  bool trace = false;
};

void add_common(CLI::App* sub, Common& c, bool config_required) {
  auto* opt = sub->add_option("--config", c.config, "JSON run configuration");
  if (config_required) opt->required();
  sub->add_option("--out", c.out, "output directory (default: $IPVS_OUT)");
  sub->add_option("--seed", c.seed, "base seed, overrides the config");
  sub->add_option("--jobs", c.jobs, "worker threads (default: $IPVS_JOBS or 1)")->check(CLI::PositiveNumber);
  sub->add_flag("--trace", c.trace, "write per-step traces");
}

Context resolve(const std::string& subcommand, const std::vector<std::string>& args, const Common& c) {
  Context ctx;
  ctx.subcommand = subcommand;
  ctx.args = args;
  ctx.cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
  if (c.seed) ctx.cfg.seed = *c.seed;
  ctx.cfg.validate();

  std::string out = c.out;
  if (out.empty()) {
    if (const char* env = std::getenv("IPVS_OUT")) out = env;
  }
  if (out.empty()) throw UsageError("--out is required (or set IPVS_OUT)");
  ctx.out = out;

  if (c.jobs) {
    ctx.jobs = *c.jobs;
  } else if (const char* env = std::getenv("IPVS_JOBS")) {
    try {
      ctx.jobs = std::stoi(env);
    } catch (const std::exception&) {
      throw UsageError("IPVS_JOBS must be a positive integer");
    }
    if (ctx.jobs < 1) throw UsageError("IPVS_JOBS must be a positive integer");
  }
  ctx.trace = c.trace;
  return ctx;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Written before any computation.
void write_manifest(const Context& ctx, const json& inputs, const std::vector<std::string>& outputs) {
  json m;
  m["tool"] = "ipvs";
  m["version"] = kVersion;
  m["dataset_schema_version"] = kDatasetSchemaVersion;
  m["model_schema_version"] = kModelSchemaVersion;
  m["subcommand"] = ctx.subcommand;
  m["args"] = ctx.args;
  m["seed"] = ctx.cfg.seed;
  m["jobs"] = ctx.jobs;
  m["config"] = to_json(ctx.cfg);
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  m["created_at"] = utc_timestamp();
  write_file(ctx.out / "manifest.json", m.dump(2) + "\n");
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

json metrics_json(const Metrics& m) {
  return {{"mse", m.mse}, {"mae", m.mae}, {"mae_mm_at_nominal", m.mae_mm_at_nominal}};
}

json report_json(const TrainReport& r) {
  return {{"epochs_run", r.epochs_run},
          {"best_epoch", r.best_epoch},
          {"best_val_loss", r.best_val_loss},
          {"stopped_early", r.stopped_early},
          {"train_curve", r.train_curve},
          {"val_curve", r.val_curve}};
}

void save_models(const fs::path& dir, const std::vector<RegressorModel>& models) {
  if (models.size() == 1 && models.front().provenance.count("camera") &&
      models.front().provenance.at("camera") == "shared") {
    save_model(models.front(), dir / "shared");
    return;
  }
  for (std::size_t j = 0; j < models.size(); ++j) save_model(models[j], dir / ("cam" + std::to_string(j)));
}

std::vector<RegressorModel> load_models(const fs::path& dir) {
  if (fs::exists(dir / "shared" / "model.json")) return {load_model(dir / "shared")};
  std::vector<RegressorModel> models;
  for (int j = 0; fs::exists(dir / ("cam" + std::to_string(j)) / "model.json"); ++j) {
    models.push_back(load_model(dir / ("cam" + std::to_string(j))));
  }
  if (models.empty()) throw Error(ErrorKind::ModelsNotDeployed, "no models found in '" + dir.string() + "'");
  return models;
}

json configure_json(const ConfigureResult& r, const DeploymentGate& gate) {
  json models = json::array();
  for (std::size_t j = 0; j < r.models.size(); ++j) {
    models.push_back({{"camera", r.models[j].provenance.count("camera") ? r.models[j].provenance.at("camera") : ""},
                      {"kind", std::string(to_string(r.models[j].kind))},
                      {"lambda", r.models[j].lambda},
                      {"val_metrics", metrics_json(r.val_metrics[j])},
                      {"report", report_json(r.reports[j])}});
  }
  return {{"decision", std::string(to_string(r.decision))},
          {"gate_max_val_mae_mm", gate.max_val_mae_mm},
          {"train_insertions", r.split.train_ids},
          {"val_insertions", r.split.val_ids},
          {"skipped_insertions", r.log.skipped_insertions},
          {"collection_attempts", r.log.attempts},
          {"samples", r.dataset.samples.size()},
          {"models", models}};
}

json outcome_json(const InsertionOutcome& o) {
  return {{"success", o.success},
          {"attempts", o.attempts},
          {"simulated_time_s", o.simulated_time},
          {"final_tcp", to_json(o.final_tcp)},
          {"retrospective_error_mm", o.retrospective_error},
          {"post_servo_retrospective_error_mm", o.post_servo_retrospective_error},
          {"true_initial_error_mm", o.true_initial_error},
          {"servo_residuals_mm", o.servo_residuals},
          {"saturated", o.saturated},
          {"pattern_tolerance_mismatch", o.pattern_tolerance_mismatch}};
}

ComponentStyle style_or_default(const std::string& name, const RunConfig& cfg) {
  return name.empty() ? cfg.world.component_style : parse_style(name);
}

// ---- subcommands ----------------------------------------------------------

void cmd_pattern(const Context& ctx, std::optional<double> tolerance, std::optional<double> radius) {
  const double tol = tolerance.value_or(ctx.cfg.world.tolerance);
  const double r = radius.value_or(ctx.cfg.pattern_radius);
  write_manifest(ctx, {{"tolerance", tol}, {"radius", r}}, {"pattern.csv"});
  const SearchPattern p = generate_pattern(tol, r);
  std::string csv = "index,dx_mm,dy_mm\n";
  for (std::size_t i = 0; i < p.offsets.size(); ++i) {
    csv += std::to_string(i) + "," + format_double(p.offsets[i].x()) + "," + format_double(p.offsets[i].y()) + "\n";
  }
  write_file(ctx.out / "pattern.csv", csv);
  std::cout << p.offsets.size() << " offsets, spacing " << p.spacing << " mm\n";
}

void cmd_simulate(const Context& ctx, const std::string& style_name, int index) {
  const ComponentStyle style = style_or_default(style_name, ctx.cfg);
  std::vector<std::string> outputs = {"world.json", "outcome.json"};
  for (std::size_t j = 0; j < ctx.cfg.world.cameras.size(); ++j) outputs.push_back("cam" + std::to_string(j) + ".pgm");
  if (ctx.trace) outputs.push_back("trajectory.csv");
  write_manifest(ctx, {{"style", std::string(to_string(style))}, {"index", index}}, outputs);

  WorldState world = new_world(bench_world(ctx.cfg.bench_config(), style, index));
  json cams = json::array();
  json labels = json::array();
  for (std::size_t j = 0; j < world.true_cameras.size(); ++j) {
    const Observation obs = render(world, static_cast<int>(j), world.tcp);
    write_file(ctx.out / ("cam" + std::to_string(j) + ".pgm"), to_pgm(obs));
    cams.push_back(to_json(world.true_cameras[j]));
    labels.push_back(*obs.truth_y);
  }
  write_json(ctx.out / "world.json",
             {{"seed", world.config.seed},
              {"style", std::string(to_string(style))},
              {"nominal_hole", to_json(world.nominal_hole)},
              {"true_hole", to_json(world.true_hole)},
              {"grasp_offset_mm", {world.grasp_offset.x(), world.grasp_offset.y()}},
              {"extra_error_mm", {world.extra_error.x(), world.extra_error.y()}},
              {"start_tcp", to_json(world.tcp)},
              {"true_initial_error", to_json(in_plane_error(world, world.tcp))},
              {"true_cameras", cams},
              {"true_labels", labels},
              {"appearance",
               {{"background", world.appearance.background},
                {"peg_scale", world.appearance.peg_scale},
                {"hole_scale", world.appearance.hole_scale}}}});
  const SearchPattern pattern = generate_pattern(world.config.tolerance, ctx.cfg.pattern_radius);
  const InsertionOutcome out = insert(world, InsertMode::SpiralOnly, ServoConfig{}, pattern, ctx.cfg.timing);
  write_json(ctx.out / "outcome.json", outcome_json(out));
  if (ctx.trace) {
    std::string csv = "step,x_mm,y_mm,z_mm\n";
    for (std::size_t i = 0; i < world.trajectory.size(); ++i) {
      const Vec3& p = world.trajectory[i];
      csv += std::to_string(i) + "," + format_double(p.x()) + "," + format_double(p.y()) + "," + format_double(p.z()) + "\n";
    }
    write_file(ctx.out / "trajectory.csv", csv);
  }
  std::cout << (out.success ? "success" : "failure") << " after " << out.attempts << " attempts, "
            << out.simulated_time << " s\n";
}

void cmd_collect(const Context& ctx, const std::string& style_name) {
  const ComponentStyle style = style_or_default(style_name, ctx.cfg);
  write_manifest(ctx, {{"style", std::string(to_string(style))}}, {"dataset/", "reports/collection.json"});
  CollectionLog log;
  const Dataset data =
      collect_dataset(make_world_factory(ctx.cfg.world_for(style)), ctx.cfg.collection,
                      generate_pattern(ctx.cfg.world.tolerance, ctx.cfg.pattern_radius), ctx.cfg.timing,
                      ctx.jobs, &log);
  save_dataset(data, ctx.out / "dataset");
  write_json(ctx.out / "reports" / "collection.json",
             {{"samples", data.samples.size()},
              {"insertions", data.groups().size()},
              {"skipped_insertions", log.skipped_insertions},
              {"attempts", log.attempts}});
  for (const int id : log.skipped_insertions) std::cerr << "skipped insertion " << id << ": search exhausted\n";
  std::cout << data.samples.size() << " samples from " << data.groups().size() << " insertions\n";
}

void cmd_train(const Context& ctx, const std::string& dataset_dir) {
  write_manifest(ctx, {{"dataset", dataset_dir}}, {"models/", "reports/train.json"});
  Dataset data = load_dataset(dataset_dir);
  TrainHyper hyper = ctx.cfg.train;
  hyper.seed = ctx.cfg.train_seed();
  ConfigureOptions opt;
  opt.jobs = ctx.jobs;
  opt.shared_model = ctx.cfg.servo.shared_model;
  opt.split_seed = ctx.cfg.split_seed();
  const DeploymentGate gate = ctx.cfg.gate();
  const ConfigureResult r =
      train_and_gate(std::move(data), ctx.cfg.collection.train_insertions, hyper, gate, opt);
  save_models(ctx.out / "models", r.models);
  write_json(ctx.out / "reports" / "train.json", configure_json(r, gate));
  std::cout << "decision: " << to_string(r.decision) << "\n";
}

void cmd_evaluate(const Context& ctx, const std::string& dataset_dir, const std::string& models_dir) {
  write_manifest(ctx, {{"dataset", dataset_dir}, {"models", models_dir}}, {"reports/evaluate.json"});
  const Dataset data = load_dataset(dataset_dir);
  const std::vector<RegressorModel> models = load_models(models_dir);
  std::vector<Metrics> metrics;
  json per_model = json::array();
  for (std::size_t j = 0; j < models.size(); ++j) {
    const Dataset part = models.size() == 1 ? data : data.for_camera(static_cast<int>(j));
    metrics.push_back(evaluate(models[j], part, ctx.cfg.seed));
    per_model.push_back(metrics_json(metrics.back()));
  }
  const DeploymentGate gate = ctx.cfg.gate();
  const Decision decision = gate_decision(metrics, gate);
  write_json(ctx.out / "reports" / "evaluate.json",
             {{"models", per_model},
              {"gate_max_val_mae_mm", gate.max_val_mae_mm},
              {"decision", std::string(to_string(decision))}});
  std::cout << "decision: " << to_string(decision) << "\n";
}

void cmd_servo(const Context& ctx, const std::string& models_dir, std::optional<double> oracle_sigma,
               const std::string& style_name, int index) {
  const ComponentStyle style = style_or_default(style_name, ctx.cfg);
  std::vector<std::string> outputs = {"outcome.json"};
  if (ctx.trace) outputs.push_back("reports/trace.csv");
  write_manifest(ctx,
                 {{"models", models_dir},
                  {"oracle_sigma", oracle_sigma ? json(*oracle_sigma) : json(nullptr)},
                  {"style", std::string(to_string(style))},
                  {"index", index}},
                 outputs);
  std::vector<RegressorModel> models;
  if (oracle_sigma) {
    models.push_back(RegressorModel::oracle(*oracle_sigma));
  } else if (!models_dir.empty()) {
    models = load_models(models_dir);
  }
  const BenchConfig bench = ctx.cfg.bench_config();
  WorldState world = new_world(bench_world(bench, style, index));
  const ServoConfig servo = ctx.cfg.servo_config(models);
  if (servo.models.empty()) throw Error(ErrorKind::ModelsNotDeployed, "servo needs --models or --oracle-sigma");
  const SearchPattern pattern = generate_pattern(bench.tolerance_for(style), bench.pattern_radius);
  ServoResult sr;
  const InsertionOutcome out = insert(world, InsertMode::ServoThenSpiral, servo, pattern, ctx.cfg.timing, &sr);
  write_json(ctx.out / "outcome.json", outcome_json(out));
  if (ctx.trace) write_file(ctx.out / "reports" / "trace.csv", servo_trace_csv(sr.steps));
  std::cout << (out.success ? "success" : "failure") << " after " << out.attempts << " attempts, "
            << out.simulated_time << " s\n";
}

std::string bench_trace_csv(const std::vector<BenchRow>& rows) {
  std::string csv = "style,mode,index,iteration,residual_mm\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.servo_residuals.size(); ++i) {
      csv += std::string(to_string(r.style)) + "," + std::string(to_string(r.mode)) + "," +
             std::to_string(r.index) + "," + std::to_string(i) + "," + format_double(r.servo_residuals[i]) + "\n";
    }
  }
  return csv;
}

std::optional<QuadraticFit> try_fit(const std::vector<BenchRow>& rows) {
  try {
    return fit_quadratic_law(rows);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InsufficientData) throw;
    return std::nullopt;
  }
}

void cmd_bench(Context ctx, const std::string& modes) {
  if (!modes.empty()) {
    ctx.cfg.bench.modes.clear();
    std::stringstream ss(modes);
    for (std::string m; std::getline(ss, m, ',');) ctx.cfg.bench.modes.push_back(parse_insert_mode(m));
  }
  std::vector<std::string> outputs = {"models/", "reports/configure.json", "reports/shift.json", "table.csv",
                                      "scatter.csv", "summary.json", "scatter.svg"};
  if (ctx.trace) outputs.push_back("reports/trace.csv");
  write_manifest(ctx, json::object(), outputs);

  const bool servo_mode = std::find(ctx.cfg.bench.modes.begin(), ctx.cfg.bench.modes.end(),
                                    InsertMode::ServoThenSpiral) != ctx.cfg.bench.modes.end();
  DeployedModels deployed;
  json configure_report = json::object();
  std::vector<std::string> blocked;
  if (servo_mode) {
    const BenchConfig bench = ctx.cfg.bench_config();
    for (const auto style : ctx.cfg.bench.styles) {
      TrainHyper hyper = ctx.cfg.train;
      hyper.seed = ctx.cfg.train_seed();
      ConfigureOptions opt;
      opt.jobs = ctx.jobs;
      opt.shared_model = ctx.cfg.servo.shared_model;
      opt.split_seed = ctx.cfg.split_seed();
      WorldConfig wc = ctx.cfg.world_for(style);
      wc.tolerance = bench.tolerance_for(style);
      DeploymentGate gate = ctx.cfg.gate();
      if (!ctx.cfg.gate_max_val_mae_mm) gate.max_val_mae_mm = wc.tolerance / 2.0;
      const ConfigureResult r = configure(make_world_factory(wc), ctx.cfg.collection,
                                          generate_pattern(wc.tolerance, ctx.cfg.pattern_radius),
                                          ctx.cfg.timing, hyper, gate, opt);
      const std::string name(to_string(style));
      configure_report[name] = configure_json(r, gate);
      save_models(ctx.out / "models" / name, r.models);
      std::cout << name << ": " << to_string(r.decision) << "\n";
      if (r.decision == Decision::Deploy) {
        deployed[style] = r.models;
      } else {
        blocked.push_back(name);
      }
    }
  }
  write_json(ctx.out / "reports" / "configure.json", configure_report);
  if (!blocked.empty()) {
    std::string names;
    for (const auto& n : blocked) names += (names.empty() ? "" : ", ") + n;
    throw Error(ErrorKind::ModelsNotDeployed, "validation gate not passed for " + names);
  }

  const BenchReport report = run_benchmark(ctx.cfg.bench_config(), deployed, ctx.jobs);
  json shift = json::object();
  for (const auto style : ctx.cfg.bench.styles) {
    ShiftMonitor monitor;
    for (const auto& row : report.rows) {
      if (row.style == style && row.mode == InsertMode::ServoThenSpiral) monitor.record(row.attempts);
    }
    shift[std::string(to_string(style))] = {{"mean_attempts", monitor.mean()},
                                            {"alert", monitor.alert()},
                                            {"recommendation", std::string(to_string(monitor.recommendation()))}};
  }
  write_json(ctx.out / "reports" / "shift.json", shift);
  emit_report(report, ctx.out, try_fit(report.rows));
  if (ctx.trace) write_file(ctx.out / "reports" / "trace.csv", bench_trace_csv(report.rows));
  std::cout << "speedup " << report.speedup << " (vs " << report.vs.mean_time_s << " s, novs "
            << report.novs.mean_time_s << " s)\n";
}

void cmd_report(const Context& ctx, const std::string& in_dir) {
  write_manifest(ctx, {{"in", in_dir}}, {"table.csv", "scatter.csv", "summary.json", "scatter.svg"});
  const BenchReport report = aggregate(parse_scatter_csv(read_file(fs::path(in_dir) / "scatter.csv")));
  emit_report(report, ctx.out, try_fit(report.rows));
  std::cout << report.rows.size() << " rows, speedup " << report.speedup << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"In-plane visual servoing: simulation, self-supervised training and benchmarks", "ipvs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common common;
  std::optional<double> tolerance, radius, oracle_sigma;
  std::string style, dataset, models, modes, in_dir;
  int index = 0;

  auto* pattern = app.add_subcommand("pattern", "write the spiral search pattern");
  add_common(pattern, common, false);
  pattern->add_option("--tolerance", tolerance, "tolerance eps in mm");
  pattern->add_option("--radius", radius, "search radius in mm");

  auto* simulate = app.add_subcommand("simulate", "render one world and run a spiral-only insertion");
  add_common(simulate, common, false);
  simulate->add_option("--style", style, "component style");
  simulate->add_option("--index", index, "world index");

  auto* collect = app.add_subcommand("collect", "collect a self-labeled dataset");
  add_common(collect, common, false);
  collect->add_option("--style", style, "component style");

  auto* train_cmd = app.add_subcommand("train", "train and gate models on a dataset");
  add_common(train_cmd, common, false);
  train_cmd->add_option("--dataset", dataset, "dataset directory")->required();

  auto* evaluate_cmd = app.add_subcommand("evaluate", "evaluate models on a dataset");
  add_common(evaluate_cmd, common, false);
  evaluate_cmd->add_option("--dataset", dataset, "dataset directory")->required();
  evaluate_cmd->add_option("--models", models, "models directory")->required();

  auto* servo = app.add_subcommand("servo", "servo then spiral insertion in one world");
  add_common(servo, common, false);
  servo->add_option("--models", models, "models directory");
  servo->add_option("--oracle-sigma", oracle_sigma, "use oracle models with this noise instead");
  servo->add_option("--style", style, "component style");
  servo->add_option("--index", index, "world index");

  auto* bench = app.add_subcommand("bench", "configure every style and run the benchmark");
  add_common(bench, common, true);
  bench->add_option("--modes", modes, "comma-separated modes: vs,novs");

  auto* report = app.add_subcommand("report", "recompute report files from a scatter.csv");
  add_common(report, common, false);
  report->add_option("--in", in_dir, "benchmark output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  CLI::App* used = app.get_subcommands().front();
  try {
    const Context ctx = resolve(used->get_name(), args, common);
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create '" + ctx.out.string() + "': " + ec.message());
    if (used == pattern) cmd_pattern(ctx, tolerance, radius);
    else if (used == simulate) cmd_simulate(ctx, style, index);
    else if (used == collect) cmd_collect(ctx, style);
    else if (used == train_cmd) cmd_train(ctx, dataset);
    else if (used == evaluate_cmd) cmd_evaluate(ctx, dataset, models);
    else if (used == servo) cmd_servo(ctx, models, oracle_sigma, style, index);
    else if (used == bench) cmd_bench(ctx, modes);
    else if (used == report) cmd_report(ctx, in_dir);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << used->help();
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int run_cli(int argc, const char* const* argv) {
  return run_cli(std::vector<std::string>(argv, argv + argc));
}

}  // namespace ipvs
