#pragma once

// Learned mapping from a camera image to the normalized scalar error y.
//
// Images are first split into two contrast-normalized channels (pixels
// brighter / darker than the image median, each divided by the image's
// bright / dark contrast). The features are the column profiles of both
// channels and their running sums, standardized with per-feature statistics
// from the training set. Three regressor kinds share that input:
//
//   oracle  simulation truth plus Gaussian noise, for ablations
//   ridge   linear model, solved in closed form along a regularization path
//   mlp     two hidden ReLU layers trained with Adam on the MSE loss
//
// Training monitors the loss on insertion-disjoint validation data and
// restores the parameters with the lowest validation loss.

#include "ipvs/geometry.hpp"
#include "ipvs/sim.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace ipvs {

struct Sample {
  Observation observation;
  double label = 0.0;  // y
  int insertion_id = 0;
  int camera_index = 0;
  double q_truth_mm = 0.0;   // error along u_j that the label encodes
  double height_mm = 0.0;    // peg height above the plane at capture
  Vec2 offset_mm = Vec2::Zero();  // sampled in-plane offset from the insertion zero
};

struct Dataset {
  int resolution = 0;
  ComponentStyle style = ComponentStyle::PH;
  std::vector<CameraModel> cameras;  // nominal geometry used for labels
  std::vector<Sample> samples;

  bool empty() const { return samples.empty(); }
  // insertion_id -> sample indices, ascending ids.
  std::map<int, std::vector<std::size_t>> groups() const;
  // Samples whose insertion id is in `ids`, order preserved.
  Dataset with_insertions(const std::vector<int>& ids) const;
  // Samples of one camera, order preserved.
  Dataset for_camera(int camera_index) const;
};

enum class ModelKind { Oracle, Ridge, Mlp };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct RegressorModel {
  ModelKind kind = ModelKind::Ridge;
  int resolution = 0;
  // Oracle noise on y.
  double noise_sigma = 0.0;

  // Feature standardization, size 4 r.
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_std;

  // ridge
  Eigen::VectorXd weights;
  double bias = 0.0;
  double lambda = 0.0;

  // mlp: layers[i] maps layer i activations to layer i + 1.
  std::vector<int> layer_sizes;  // input, hidden..., 1
  std::vector<Eigen::MatrixXd> layer_weights;
  std::vector<Eigen::VectorXd> layer_biases;

  // Free-form training provenance written to model.json.
  std::map<std::string, std::string> provenance;

  int feature_count() const { return 4 * resolution; }
  std::size_t parameter_count() const;

  static RegressorModel oracle(double noise_sigma, int resolution = 0);
  // All-zero weights with identity standardization.
  static RegressorModel constant(double value, int resolution);
};

// Column-profile features of one image (unstandardized), size 4 r.
Eigen::VectorXd image_features(const Observation& obs);
// One row per sample.
Eigen::MatrixXd feature_matrix(const Dataset& data);

// Throws ShapeMismatch when the image does not match the model input.
// Oracle models need obs.truth_y and draw their noise from `rng`.
double predict(const RegressorModel& model, const Observation& obs, std::mt19937_64* rng = nullptr);

struct TrainHyper {
  ModelKind kind = ModelKind::Ridge;
  double learning_rate = 1e-4;
  int batch_size = 32;
  int max_epochs = 500;
  int patience = 20;
  // ridge: smallest regularization on the path, relative to the mean squared
  // feature-row norm. mlp: L2 weight decay.
  double lambda = 1e-8;
  std::uint64_t seed = 0;
  std::vector<int> hidden = {128, 128};
};

struct TrainReport {
  int epochs_run = 0;
  double best_val_loss = 0.0;
  int best_epoch = 0;
  std::vector<double> train_curve;
  std::vector<double> val_curve;
  bool stopped_early = false;
};

struct TrainResult {
  RegressorModel model;
  TrainReport report;
};

// Throws EmptyDataset, LeakedInsertion, ShapeMismatch.
TrainResult train(const Dataset& train_data, const Dataset& val_data, const TrainHyper& hyper);

struct Metrics {
  double mse = 0.0;
  double mae = 0.0;
  double mae_mm_at_nominal = 0.0;
};

// Oracle models draw noise from a generator seeded with `seed`.
Metrics evaluate(const RegressorModel& model, const Dataset& data, std::uint64_t seed = 0);

// Mean squared error of an mlp on standardized features, with gradients in
// the order of flatten_parameters.
double mlp_loss(const RegressorModel& model, const Eigen::MatrixXd& standardized_features,
                const Eigen::VectorXd& labels, Eigen::VectorXd* gradient = nullptr);

Eigen::VectorXd flatten_parameters(const RegressorModel& model);
void unflatten_parameters(RegressorModel& model, const Eigen::VectorXd& theta);

// He-initialized mlp for the given feature statistics.
RegressorModel init_mlp(int resolution, const std::vector<int>& hidden, std::uint64_t seed,
                        const Eigen::VectorXd& feature_mean, const Eigen::VectorXd& feature_std);

// Max relative deviation between analytic and central-difference gradients
// (step 1e-5) over `n_params` randomly chosen parameters.
// Throws NotDifferentiableKind for non-mlp models.
double gradient_check(const RegressorModel& model, const Dataset& batch, int n_params = 128,
                      std::uint64_t seed = 0);
double gradient_check(const RegressorModel& model, const Eigen::MatrixXd& standardized_features,
                      const Eigen::VectorXd& labels, int n_params = 128, std::uint64_t seed = 0);

// Applies the stored standardization to raw feature rows.
Eigen::MatrixXd standardize(const RegressorModel& model, const Eigen::MatrixXd& raw_features);

}  // namespace ipvs
