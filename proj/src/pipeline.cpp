#include "ipvs/pipeline.hpp"

#include "ipvs/errors.hpp"
#include "ipvs/parallel.hpp"
#include "ipvs/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <set>

namespace ipvs {

namespace {

constexpr std::uint64_t kWorldTag = 0x776f726c64;   // "world"
constexpr std::uint64_t kOffsetTag = 0x6f6666736574;  // "offset"
constexpr std::uint64_t kCameraTag = 0x63616d;        // "cam"

struct InsertionSamples {
  bool success = false;
  int attempts = 0;
  ComponentStyle style = ComponentStyle::PH;
  std::vector<CameraModel> cameras;
  std::vector<Sample> samples;
};

InsertionSamples collect_one(WorldState world, int insertion_id, const CollectionConfig& cfg,
                             const SearchPattern& pattern, const TimingModel& timing) {
  InsertionSamples out;
  const InsertionOutcome found = spiral_insert(world, world.hover_tcp(), pattern, timing);
  out.attempts = found.attempts;
  if (!found.success) return out;
  out.success = true;
  out.cameras = world.config.cameras;
  out.style = world.config.component_style;

  // The successful position is taken as the in-plane zero.
  const Vec3 zero = found.final_tcp;
  const double zero_height = world.height_of(zero);
  std::vector<Vec3> dirs;
  for (const auto& cam : world.config.cameras) {
    dirs.push_back(error_direction(world.l(), world.nominal_hole - cam.position));
  }

  std::mt19937_64 rng(derive_seed(world.config.seed, kOffsetTag));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < cfg.samples_per_insertion; ++k) {
    const double angle = 2.0 * std::numbers::pi * unit(rng);
    const double mag = cfg.max_offset_mag * unit(rng);
    const double height = cfg.max_height * unit(rng);
    const Vec2 offset = mag * Vec2(std::cos(angle), std::sin(angle));
    const Vec3 offset3 = world.from_plane(offset);
    const Vec3 tcp = zero + offset3 + (zero_height - height) * world.l();
    for (std::size_t j = 0; j < world.config.cameras.size(); ++j) {
      Sample s;
      s.insertion_id = insertion_id;
      s.camera_index = static_cast<int>(j);
      s.observation = render(world, s.camera_index, tcp);
      s.q_truth_mm = scalar_error(-offset3, dirs[j]);
      s.label = normalize_error(s.q_truth_mm, world.config.cameras[j]);
      s.height_mm = height;
      s.offset_mm = offset;
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace

void CollectionConfig::validate() const {
  if (n_insertions < 1 || samples_per_insertion < 1) {
    throw Error(ErrorKind::InvalidConfig, "collection counts must be positive");
  }
  if (!(max_offset_mag > 0.0) || !(max_height >= 0.0)) {
    throw Error(ErrorKind::InvalidConfig, "offset range must be > 0 and height range >= 0");
  }
  if (train_insertions < 1 || train_insertions >= n_insertions) {
    throw Error(ErrorKind::InvalidConfig,
                "train_insertions must leave at least one validation insertion");
  }
}

std::string_view to_string(Decision decision) {
  return decision == Decision::Deploy ? "deploy" : "collect_more";
}

WorldFactory make_world_factory(const WorldConfig& base) {
  return [base](int index) {
    WorldConfig cfg = base;
    cfg.seed = derive_seed(base.seed, kWorldTag, static_cast<std::uint64_t>(index));
    return new_world(cfg);
  };
}

Dataset collect_dataset(const WorldFactory& factory, const CollectionConfig& cfg,
                        const SearchPattern& pattern, const TimingModel& timing, int jobs,
                        CollectionLog* log) {
  cfg.validate();
  timing.validate();
  std::vector<InsertionSamples> parts(static_cast<std::size_t>(cfg.n_insertions));
  parallel_for(parts.size(), jobs, [&](std::size_t i) {
    parts[i] = collect_one(factory(static_cast<int>(i)), static_cast<int>(i), cfg, pattern, timing);
  });

  Dataset data;
  CollectionLog local;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    auto& part = parts[i];
    if (!part.success) {
      local.skipped_insertions.push_back(static_cast<int>(i));
      continue;
    }
    local.attempts.push_back(part.attempts);
    if (data.cameras.empty()) {
      data.cameras = part.cameras;
      data.resolution = part.cameras.front().resolution;
      data.style = part.style;
    }
    for (auto& s : part.samples) data.samples.push_back(std::move(s));
  }
  if (log) *log = local;
  if (data.samples.empty()) {
    throw Error(ErrorKind::AllInsertionsFailed, "spiral search failed on every collection insertion");
  }
  for (const auto& cam : data.cameras) {
    if (cam.resolution != data.resolution) {
      throw Error(ErrorKind::ShapeMismatch, "all cameras must share one resolution");
    }
  }
  return data;
}

Split split_by_insertion(const Dataset& data, int train_insertions, std::uint64_t seed) {
  std::vector<int> ids;
  for (const auto& [id, idx] : data.groups()) ids.push_back(id);
  if (train_insertions < 1 || static_cast<int>(ids.size()) <= train_insertions) {
    throw Error(ErrorKind::TooFewInsertions,
                "need more than " + std::to_string(train_insertions) + " insertions, have " +
                    std::to_string(ids.size()));
  }
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  Split split;
  split.train_ids.assign(ids.begin(), ids.begin() + train_insertions);
  split.val_ids.assign(ids.begin() + train_insertions, ids.end());
  std::sort(split.train_ids.begin(), split.train_ids.end());
  std::sort(split.val_ids.begin(), split.val_ids.end());
  split.train = data.with_insertions(split.train_ids);
  split.val = data.with_insertions(split.val_ids);
  return split;
}

Decision gate_decision(const std::vector<Metrics>& val_metrics, const DeploymentGate& gate) {
  if (val_metrics.empty()) return Decision::CollectMore;
  for (const auto& m : val_metrics) {
    if (!(m.mae_mm_at_nominal <= gate.max_val_mae_mm)) return Decision::CollectMore;
  }
  return Decision::Deploy;
}

ConfigureResult train_and_gate(Dataset data, int train_insertions, const TrainHyper& hyper,
                               const DeploymentGate& gate, const ConfigureOptions& options) {
  if (!(gate.max_val_mae_mm >= 0.0)) throw Error(ErrorKind::InvalidConfig, "gate threshold must be >= 0");
  ConfigureResult result;
  result.dataset = std::move(data);
  result.split = split_by_insertion(result.dataset, train_insertions, options.split_seed);

  const std::set<int> train_ids(result.split.train_ids.begin(), result.split.train_ids.end());
  for (const int id : result.split.val_ids) {
    if (train_ids.count(id)) throw Error(ErrorKind::LeakedInsertion, "train and val share an insertion");
  }

  const std::size_t n_models = options.shared_model ? 1 : result.dataset.cameras.size();
  std::vector<std::optional<TrainResult>> trained(n_models);
  std::vector<Metrics> metrics(n_models);
  parallel_for(n_models, options.jobs, [&](std::size_t j) {
    const Dataset train_part =
        options.shared_model ? result.split.train : result.split.train.for_camera(static_cast<int>(j));
    const Dataset val_part =
        options.shared_model ? result.split.val : result.split.val.for_camera(static_cast<int>(j));
    TrainHyper h = hyper;
    h.seed = derive_seed(hyper.seed, kCameraTag, j);
    trained[j] = train(train_part, val_part, h);
    trained[j]->model.provenance["camera"] = options.shared_model ? "shared" : std::to_string(j);
    metrics[j] = evaluate(trained[j]->model, val_part, h.seed);
  });
  for (std::size_t j = 0; j < n_models; ++j) {
    result.models.push_back(std::move(trained[j]->model));
    result.reports.push_back(std::move(trained[j]->report));
  }
  result.val_metrics = std::move(metrics);
  result.decision = gate_decision(result.val_metrics, gate);
  return result;
}

ConfigureResult configure(const WorldFactory& factory, const CollectionConfig& cfg,
                          const SearchPattern& pattern, const TimingModel& timing,
                          const TrainHyper& hyper, const DeploymentGate& gate,
                          const ConfigureOptions& options) {
  if (!(gate.max_val_mae_mm >= 0.0)) throw Error(ErrorKind::InvalidConfig, "gate threshold must be >= 0");
  CollectionLog log;
  Dataset data = collect_dataset(factory, cfg, pattern, timing, options.jobs, &log);
  ConfigureResult result = train_and_gate(std::move(data), cfg.train_insertions, hyper, gate, options);
  result.log = std::move(log);
  return result;
}

std::string_view to_string(InsertMode mode) {
  return mode == InsertMode::SpiralOnly ? "novs" : "vs";
}

InsertMode parse_insert_mode(std::string_view name) {
  if (name == "novs" || name == "spiral_only") return InsertMode::SpiralOnly;
  if (name == "vs" || name == "servo_then_spiral") return InsertMode::ServoThenSpiral;
  throw Error(ErrorKind::InvalidConfig, "unknown insertion mode '" + std::string(name) + "'");
}

InsertionOutcome insert(WorldState& world, InsertMode mode, const ServoConfig& servo_cfg,
                        const SearchPattern& pattern, const TimingModel& timing,
                        ServoResult* servo_result) {
  const Vec3 start = world.tcp;
  const double true_initial = in_plane_error(world, start).norm();
  std::optional<ServoResult> servo;
  if (mode == InsertMode::ServoThenSpiral) {
    if (servo_cfg.models.empty()) {
      throw Error(ErrorKind::ModelsNotDeployed, "servo mode requires deployed models");
    }
    servo = visual_servo(world, servo_cfg);
  }
  const Vec3 spiral_start = world.tcp;
  InsertionOutcome out = spiral_insert(world, spiral_start, pattern, timing);
  out.true_initial_error = true_initial;
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  if (out.success) {
    out.retrospective_error = in_plane(out.final_tcp - start, world.l()).norm();
    out.post_servo_retrospective_error =
        servo ? in_plane(out.final_tcp - spiral_start, world.l()).norm() : nan;
  } else {
    out.retrospective_error = nan;
    out.post_servo_retrospective_error = nan;
  }
  if (servo) {
    out.simulated_time += servo->time_s;
    out.servo_residuals = servo->residuals;
    out.saturated = servo->saturated;
    if (servo_result) *servo_result = std::move(*servo);
  }
  return out;
}

ShiftMonitor::ShiftMonitor(std::size_t window, double max_mean_attempts)
    : window_(std::max<std::size_t>(window, 1)), threshold_(max_mean_attempts) {}

void ShiftMonitor::record(int attempts) {
  recent_.push_back(attempts);
  if (recent_.size() > window_) recent_.pop_front();
}

double ShiftMonitor::mean() const {
  if (recent_.empty()) return 0.0;
  return static_cast<double>(std::accumulate(recent_.begin(), recent_.end(), 0L)) /
         static_cast<double>(recent_.size());
}

bool ShiftMonitor::alert() const { return recent_.size() == window_ && mean() > threshold_; }

}  // namespace ipvs
