#include "ipvs/config.hpp"

#include "ipvs/errors.hpp"
#include "ipvs/io.hpp"
#include "ipvs/random.hpp"

#include <set>
#include <string>

namespace ipvs {

using nlohmann::json;

namespace {

constexpr std::uint64_t kWorldSeedTag = 0x77;
constexpr std::uint64_t kSplitSeedTag = 0x73;
constexpr std::uint64_t kTrainSeedTag = 0x74;
constexpr std::uint64_t kBenchSeedTag = 0x62;

// Reads known keys from one JSON object and rejects the rest.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(ErrorKind::InvalidConfig, "'" + path_ + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& value) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      value = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorKind::InvalidConfig, "'" + path_ + "." + key + "' has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string path(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) {
        throw Error(ErrorKind::InvalidConfig, "unknown key '" + path_ + "." + item.key() + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_world(const json& j, WorldConfig& w) {
  Section s(j, "world");
  s.read("tolerance", w.tolerance);
  s.read("hole_uncertainty_sigma", w.hole_uncertainty_sigma);
  s.read("grasp_uncertainty_sigma", w.grasp_uncertainty_sigma);
  s.read("extra_error_radius", w.extra_error_radius);
  if (const json* l = s.child("insertion_direction")) w.insertion_direction = vec3_from_json(*l);
  if (const json* h = s.child("nominal_hole")) w.nominal_hole = vec3_from_json(*h);
  std::string style = std::string(to_string(w.component_style));
  s.read("component_style", style);
  w.component_style = parse_style(style);
  s.read("hover_height", w.hover_height);
  s.read("camera_angle_error_deg", w.camera_angle_error_deg);
  s.read("peg_matches_background", w.peg_matches_background);
  if (const json* cams = s.child("cameras")) {
    if (!cams->is_array()) throw Error(ErrorKind::InvalidConfig, "'world.cameras' must be a list");
    w.cameras.clear();
    for (const auto& c : *cams) w.cameras.push_back(camera_from_json(c));
  } else {
    w.cameras = default_cameras(w.nominal_hole, w.insertion_direction);
  }
  s.finish();
}

json world_json(const WorldConfig& w) {
  json cams = json::array();
  for (const auto& c : w.cameras) cams.push_back(to_json(c));
  return {{"tolerance", w.tolerance},
          {"hole_uncertainty_sigma", w.hole_uncertainty_sigma},
          {"grasp_uncertainty_sigma", w.grasp_uncertainty_sigma},
          {"extra_error_radius", w.extra_error_radius},
          {"insertion_direction", to_json(w.insertion_direction)},
          {"nominal_hole", to_json(w.nominal_hole)},
          {"component_style", std::string(to_string(w.component_style))},
          {"hover_height", w.hover_height},
          {"camera_angle_error_deg", w.camera_angle_error_deg},
          {"peg_matches_background", w.peg_matches_background},
          {"cameras", cams}};
}

}  // namespace

DeploymentGate RunConfig::gate() const {
  return {gate_max_val_mae_mm.value_or(world.tolerance / 2.0)};
}

void RunConfig::validate() const {
  world.validate();
  timing.validate();
  collection.validate();
  if (!(gate().max_val_mae_mm >= 0.0)) throw Error(ErrorKind::InvalidConfig, "gate threshold must be >= 0");
  if (servo.n_iters < 1) throw Error(ErrorKind::InvalidConfig, "servo.n_iters must be >= 1");
  if (!(servo.clamp_mm > 0.0)) throw Error(ErrorKind::InvalidConfig, "servo.clamp_mm must be > 0");
  if (!(pattern_radius >= 0.0)) throw Error(ErrorKind::InvalidRadius, "pattern.max_radius must be >= 0");
  if (train.batch_size < 1 || train.max_epochs < 1 || train.patience < 1) {
    throw Error(ErrorKind::InvalidConfig, "train batch_size, max_epochs and patience must be >= 1");
  }
  bench_config().validate();
}

std::uint64_t RunConfig::world_seed(ComponentStyle style) const {
  return derive_seed(seed, kWorldSeedTag, static_cast<std::uint64_t>(style));
}
std::uint64_t RunConfig::split_seed() const { return derive_seed(seed, kSplitSeedTag); }
std::uint64_t RunConfig::train_seed() const { return derive_seed(seed, kTrainSeedTag); }
std::uint64_t RunConfig::bench_seed() const { return derive_seed(seed, kBenchSeedTag); }

WorldConfig RunConfig::world_for(ComponentStyle style) const {
  WorldConfig w = world;
  w.component_style = style;
  w.seed = world_seed(style);
  return w;
}

BenchConfig RunConfig::bench_config() const {
  BenchConfig b;
  b.styles = bench.styles;
  b.insertions_per_style = bench.insertions_per_style;
  b.error_disc_radius = bench.error_disc_radius;
  b.tolerance = world.tolerance;
  b.style_tolerance = bench.style_tolerance;
  b.pattern_radius = pattern_radius;
  b.n_iters = servo.n_iters;
  b.clamp_mm = servo.clamp_mm;
  b.seed = bench_seed();
  b.timing = timing;
  b.modes = bench.modes;
  b.world = world;
  return b;
}

ServoConfig RunConfig::servo_config(std::vector<RegressorModel> models) const {
  ServoConfig s;
  s.n_iters = servo.n_iters;
  s.clamp_mm = servo.clamp_mm;
  s.timing = timing;
  s.models = std::move(models);
  return s;
}

RunConfig config_from_json(const json& j) {
  RunConfig cfg;
  Section root(j, "config");
  root.read("seed", cfg.seed);
  if (const json* w = root.child("world")) read_world(*w, cfg.world);
  if (const json* t = root.child("timing")) {
    Section s(*t, "timing");
    s.read("t_attempt", cfg.timing.t_attempt);
    s.read("t_capture", cfg.timing.t_capture);
    s.read("t_infer", cfg.timing.t_infer);
    s.read("t_move", cfg.timing.t_move);
    double derived_k = 0.0;  // echoed in manifests, not configurable
    s.read("k", derived_k);
    s.finish();
  }
  if (const json* c = root.child("collection")) {
    Section s(*c, "collection");
    s.read("n_insertions", cfg.collection.n_insertions);
    s.read("samples_per_insertion", cfg.collection.samples_per_insertion);
    s.read("max_offset_mag", cfg.collection.max_offset_mag);
    s.read("max_height", cfg.collection.max_height);
    s.read("train_insertions", cfg.collection.train_insertions);
    s.finish();
  }
  if (const json* t = root.child("train")) {
    Section s(*t, "train");
    std::string kind = std::string(to_string(cfg.train.kind));
    s.read("kind", kind);
    cfg.train.kind = parse_model_kind(kind);
    s.read("learning_rate", cfg.train.learning_rate);
    s.read("batch_size", cfg.train.batch_size);
    s.read("max_epochs", cfg.train.max_epochs);
    s.read("patience", cfg.train.patience);
    s.read("lambda", cfg.train.lambda);
    s.read("hidden", cfg.train.hidden);
    s.finish();
  }
  if (const json* g = root.child("gate")) {
    Section s(*g, "gate");
    if (const json* v = s.child("max_val_mae_mm"); v && !v->is_null()) {
      if (!v->is_number()) throw Error(ErrorKind::InvalidConfig, "'gate.max_val_mae_mm' must be a number");
      cfg.gate_max_val_mae_mm = v->get<double>();
    }
    s.finish();
  }
  if (const json* v = root.child("servo")) {
    Section s(*v, "servo");
    s.read("n_iters", cfg.servo.n_iters);
    s.read("clamp_mm", cfg.servo.clamp_mm);
    s.read("shared_model", cfg.servo.shared_model);
    s.finish();
  }
  if (const json* b = root.child("bench")) {
    Section s(*b, "bench");
    std::vector<std::string> styles;
    s.read("styles", styles);
    if (b->contains("styles")) {
      cfg.bench.styles.clear();
      for (const auto& name : styles) cfg.bench.styles.push_back(parse_style(name));
    }
    s.read("insertions_per_style", cfg.bench.insertions_per_style);
    s.read("error_disc_radius", cfg.bench.error_disc_radius);
    std::vector<std::string> modes;
    s.read("modes", modes);
    if (b->contains("modes")) {
      cfg.bench.modes.clear();
      for (const auto& name : modes) cfg.bench.modes.push_back(parse_insert_mode(name));
    }
    std::map<std::string, double> tol;
    s.read("style_tolerance", tol);
    for (const auto& [name, value] : tol) cfg.bench.style_tolerance[parse_style(name)] = value;
    s.finish();
  }
  if (const json* p = root.child("pattern")) {
    Section s(*p, "pattern");
    s.read("max_radius", cfg.pattern_radius);
    s.finish();
  }
  root.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) { return config_from_json(read_json(path)); }

json to_json(const RunConfig& cfg) {
  json styles = json::array();
  for (const auto s : cfg.bench.styles) styles.push_back(std::string(to_string(s)));
  json modes = json::array();
  for (const auto m : cfg.bench.modes) modes.push_back(std::string(to_string(m)));
  json tol = json::object();
  for (const auto& [style, value] : cfg.bench.style_tolerance) tol[std::string(to_string(style))] = value;
  return {{"seed", cfg.seed},
          {"world", world_json(cfg.world)},
          {"timing",
           {{"t_attempt", cfg.timing.t_attempt},
            {"t_capture", cfg.timing.t_capture},
            {"t_infer", cfg.timing.t_infer},
            {"t_move", cfg.timing.t_move},
            {"k", cfg.timing.k()}}},
          {"collection",
           {{"n_insertions", cfg.collection.n_insertions},
            {"samples_per_insertion", cfg.collection.samples_per_insertion},
            {"max_offset_mag", cfg.collection.max_offset_mag},
            {"max_height", cfg.collection.max_height},
            {"train_insertions", cfg.collection.train_insertions}}},
          {"train",
           {{"kind", std::string(to_string(cfg.train.kind))},
            {"learning_rate", cfg.train.learning_rate},
            {"batch_size", cfg.train.batch_size},
            {"max_epochs", cfg.train.max_epochs},
            {"patience", cfg.train.patience},
            {"lambda", cfg.train.lambda},
            {"hidden", cfg.train.hidden}}},
          {"gate", {{"max_val_mae_mm", cfg.gate().max_val_mae_mm}}},
          {"servo",
           {{"n_iters", cfg.servo.n_iters},
            {"clamp_mm", cfg.servo.clamp_mm},
            {"shared_model", cfg.servo.shared_model}}},
          {"bench",
           {{"styles", styles},
            {"insertions_per_style", cfg.bench.insertions_per_style},
            {"error_disc_radius", cfg.bench.error_disc_radius},
            {"modes", modes},
            {"style_tolerance", tol}}},
          {"pattern", {{"max_radius", cfg.pattern_radius}}}};
}

}  // namespace ipvs
