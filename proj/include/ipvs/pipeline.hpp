#pragma once

// Self-supervised configuration lifecycle: spiral-search driven data
// collection, insertion-wise split, training, validation gate and the
// deployed insertion routine.

#include "ipvs/perception.hpp"
#include "ipvs/search.hpp"
#include "ipvs/servoing.hpp"
#include "ipvs/sim.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <string_view>
#include <vector>

namespace ipvs {

struct CollectionConfig {
  int n_insertions = 10;
  int samples_per_insertion = 100;
  double max_offset_mag = 1.0;  // mm
  double max_height = 1.0;      // mm
  int train_insertions = 8;

  void validate() const;
};

enum class Decision { Deploy, CollectMore };
std::string_view to_string(Decision decision);

struct DeploymentGate {
  double max_val_mae_mm = 0.05;
};

// Fresh world for collection insertion i.
using WorldFactory = std::function<WorldState(int insertion_index)>;

// Worlds sharing `base` but with seeds derived from base.seed and the index.
WorldFactory make_world_factory(const WorldConfig& base);

struct CollectionLog {
  std::vector<int> skipped_insertions;  // spiral search exhausted
  std::vector<int> attempts;            // per successful insertion
};

// One successful spiral insertion per world defines the in-plane zero; the
// sampled TCP offsets around it are rendered by every camera and labeled
// with the correction y = normalize(-offset . u_j) at nominal geometry.
// Throws AllInsertionsFailed when no insertion succeeds.
Dataset collect_dataset(const WorldFactory& factory, const CollectionConfig& cfg,
                        const SearchPattern& pattern, const TimingModel& timing, int jobs = 1,
                        CollectionLog* log = nullptr);

struct Split {
  Dataset train;
  Dataset val;
  std::vector<int> train_ids;
  std::vector<int> val_ids;
};

// Random partition of whole insertions. Throws TooFewInsertions.
Split split_by_insertion(const Dataset& data, int train_insertions, std::uint64_t seed);

struct ConfigureOptions {
  bool shared_model = false;  // one model for all cameras
  int jobs = 1;
  std::uint64_t split_seed = 0;
};

struct ConfigureResult {
  Dataset dataset;
  Split split;
  CollectionLog log;
  std::vector<RegressorModel> models;
  std::vector<TrainReport> reports;
  std::vector<Metrics> val_metrics;
  Decision decision = Decision::CollectMore;
};

// split -> train per camera -> evaluate on val -> gate, on collected data.
ConfigureResult train_and_gate(Dataset data, int train_insertions, const TrainHyper& hyper,
                               const DeploymentGate& gate, const ConfigureOptions& options = {});

// collect -> split -> train per camera -> evaluate on val -> gate.
ConfigureResult configure(const WorldFactory& factory, const CollectionConfig& cfg,
                          const SearchPattern& pattern, const TimingModel& timing,
                          const TrainHyper& hyper, const DeploymentGate& gate,
                          const ConfigureOptions& options = {});

// Gate rule on already evaluated models.
Decision gate_decision(const std::vector<Metrics>& val_metrics, const DeploymentGate& gate);

enum class InsertMode { SpiralOnly, ServoThenSpiral };
std::string_view to_string(InsertMode mode);
// "novs" / "vs"; throws InvalidConfig.
InsertMode parse_insert_mode(std::string_view name);

// Insertion from the world's current TCP. Throws ModelsNotDeployed in servo
// mode without models; an exhausted search is reported as success = false.
// The servo phase is copied to `servo_result` when given.
InsertionOutcome insert(WorldState& world, InsertMode mode, const ServoConfig& servo_cfg,
                        const SearchPattern& pattern, const TimingModel& timing,
                        ServoResult* servo_result = nullptr);

// Rolling mean of spiral attempts after servoing; a rising count means the
// models no longer match the cell.
class ShiftMonitor {
 public:
  explicit ShiftMonitor(std::size_t window = 20, double max_mean_attempts = 3.0);
  void record(int attempts);
  double mean() const;
  // Only once the window is full.
  bool alert() const;
  Decision recommendation() const { return alert() ? Decision::CollectMore : Decision::Deploy; }

 private:
  std::size_t window_;
  double threshold_;
  std::deque<int> recent_;
};

}  // namespace ipvs
