#pragma once

// Run configuration read from JSON. Every section and key is optional;
// missing values take the defaults below and unknown keys are rejected.
// All stochastic behavior derives from the single top-level seed.

#include "ipvs/bench.hpp"
#include "ipvs/perception.hpp"
#include "ipvs/pipeline.hpp"
#include "ipvs/sim.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>

namespace ipvs {

struct ServoSettings {
  int n_iters = 3;
  double clamp_mm = 2.0;
  bool shared_model = false;
};

struct BenchSettings {
  std::vector<ComponentStyle> styles{kAllStyles.begin(), kAllStyles.end()};
  int insertions_per_style = 10;
  double error_disc_radius = 1.0;
  std::vector<InsertMode> modes{InsertMode::ServoThenSpiral, InsertMode::SpiralOnly};
  std::map<ComponentStyle, double> style_tolerance;
};

struct RunConfig {
  std::uint64_t seed = 0;
  WorldConfig world;
  TimingModel timing;
  CollectionConfig collection;
  TrainHyper train;
  // Defaults to half the tolerance.
  std::optional<double> gate_max_val_mae_mm;
  ServoSettings servo;
  BenchSettings bench;
  double pattern_radius = 1.5;  // mm

  DeploymentGate gate() const;
  void validate() const;

  // Seeds of the individual stages.
  std::uint64_t world_seed(ComponentStyle style) const;
  std::uint64_t split_seed() const;
  std::uint64_t train_seed() const;
  std::uint64_t bench_seed() const;

  // Base world for one style with the derived seed.
  WorldConfig world_for(ComponentStyle style) const;
  BenchConfig bench_config() const;
  ServoConfig servo_config(std::vector<RegressorModel> models) const;
};

// Throws InvalidConfig for unknown keys or wrong types.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
// All defaults materialized.
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace ipvs
