#include "ipvs/perception.hpp"

#include "ipvs/errors.hpp"
#include "ipvs/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace ipvs {

namespace {

constexpr int kExtremePixels = 8;
constexpr double kMinContrast = 0.05;
// Deviations from the median below this level are noise or low-contrast pin marks.
constexpr double kNoiseFloor = 0.2;
// About one fully contrasted pixel; keeps nearly empty channels from being amplified.
constexpr double kMinMass = 1.0;
// Features that barely vary in training would otherwise blow up on unseen images.
constexpr double kStdFloor = 1e-2;
// Labels are O(0.1); a small output layer keeps the initial predictions in range.
constexpr double kOutputInitScale = 0.01;

// Ridge regularization path: lambda_k = scale * 10^(2 - k / 4).
constexpr double kPathStartExponent = 2.0;
constexpr double kPathStepExponent = 0.25;

void check_resolution(const RegressorModel& model, int resolution) {
  if (model.kind != ModelKind::Oracle && resolution != model.resolution) {
    throw Error(ErrorKind::ShapeMismatch, "image resolution " + std::to_string(resolution) +
                                              " does not match model input " +
                                              std::to_string(model.resolution));
  }
}

Eigen::VectorXd labels_of(const Dataset& data) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(data.samples.size()));
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    y(static_cast<Eigen::Index>(i)) = data.samples[i].label;
  }
  return y;
}

double mse(const Eigen::VectorXd& pred, const Eigen::VectorXd& y) {
  return (pred - y).squaredNorm() / static_cast<double>(y.size());
}

// Forward pass over rows of standardized features. Keeps pre-activations when
// `acts` is given: acts[0] = input, acts[i] = post-activation of layer i.
Eigen::VectorXd mlp_forward(const RegressorModel& m, const Eigen::MatrixXd& x,
                            std::vector<Eigen::MatrixXd>* acts = nullptr) {
  Eigen::MatrixXd a = x;
  if (acts) acts->assign(1, x);
  const std::size_t n_layers = m.layer_weights.size();
  for (std::size_t i = 0; i < n_layers; ++i) {
    Eigen::MatrixXd z = a * m.layer_weights[i].transpose();
    z.rowwise() += m.layer_biases[i].transpose();
    if (i + 1 < n_layers) z = z.cwiseMax(0.0);
    a = std::move(z);
    if (acts) acts->push_back(a);
  }
  return a.col(0);
}

Eigen::VectorXd predict_rows(const RegressorModel& model, const Eigen::MatrixXd& z) {
  if (model.kind == ModelKind::Ridge) {
    return (z * model.weights).array() + model.bias;
  }
  return mlp_forward(model, z);
}

void fit_standardization(const Eigen::MatrixXd& x, Eigen::VectorXd& mean, Eigen::VectorXd& sd) {
  const auto n = static_cast<double>(x.rows());
  mean = x.colwise().mean().transpose();
  sd.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - mean(j)).square().sum() / n;
    const double s = std::sqrt(var);
    sd(j) = std::max(s, kStdFloor);
  }
}

void check_train_inputs(const Dataset& train_data, const Dataset& val_data) {
  if (train_data.empty() || val_data.empty()) {
    throw Error(ErrorKind::EmptyDataset, "training and validation data must be non-empty");
  }
  if (train_data.resolution != val_data.resolution) {
    throw Error(ErrorKind::ShapeMismatch, "train and validation resolutions differ");
  }
  std::set<int> train_ids;
  for (const auto& s : train_data.samples) train_ids.insert(s.insertion_id);
  for (const auto& s : val_data.samples) {
    if (train_ids.count(s.insertion_id)) {
      throw Error(ErrorKind::LeakedInsertion,
                  "insertion " + std::to_string(s.insertion_id) +
                      " appears in both training and validation data");
    }
  }
}

TrainResult train_ridge(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                        const Eigen::MatrixXd& zv, const Eigen::VectorXd& yv,
                        const TrainHyper& hyper, RegressorModel model) {
  const double y_mean = y.mean();
  const Eigen::VectorXd yc = y.array() - y_mean;
  const Eigen::Index n = z.rows();
  const Eigen::Index d = z.cols();
  const bool dual = n <= d;

  // Eigendecomposition of the smaller Gram matrix; each lambda is then a
  // diagonal rescaling.
  Eigen::MatrixXd gram = dual ? Eigen::MatrixXd(z * z.transpose())
                              : Eigen::MatrixXd(z.transpose() * z);
  const double scale = std::max(gram.trace() / static_cast<double>(n), 1e-300);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd evals = eig.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd& evecs = eig.eigenvectors();

  // Projections shared by every lambda.
  Eigen::VectorXd proj;            // Q^T yc (dual) or P^T Z^T yc (primal)
  Eigen::MatrixXd train_basis;     // maps coefficients to train predictions
  Eigen::MatrixXd val_basis;       // maps coefficients to val predictions
  if (dual) {
    proj = evecs.transpose() * yc;
    train_basis = evecs * evals.asDiagonal();
    val_basis = zv * (z.transpose() * evecs);
  } else {
    proj = evecs.transpose() * (z.transpose() * yc);
    train_basis = z * evecs;
    val_basis = zv * evecs;
  }
  const double floor_eval = 1e-14 * std::max(evals.maxCoeff(), 1e-300);

  auto coefficients = [&](double lambda) {
    Eigen::VectorXd c(proj.size());
    for (Eigen::Index i = 0; i < proj.size(); ++i) {
      c(i) = evals(i) > floor_eval ? proj(i) / (evals(i) + lambda) : 0.0;
    }
    return c;
  };

  TrainReport report;
  double best_lambda = 0.0;
  int since_best = 0;
  const double lambda_floor = hyper.lambda * scale;
  for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
    const double lambda =
        scale * std::pow(10.0, kPathStartExponent - kPathStepExponent * static_cast<double>(epoch));
    if (epoch > 0 && lambda < lambda_floor) break;
    const Eigen::VectorXd c = coefficients(lambda);
    const double train_loss = mse((train_basis * c).array() + y_mean, y);
    const double val_loss = mse((val_basis * c).array() + y_mean, yv);
    report.train_curve.push_back(train_loss);
    report.val_curve.push_back(val_loss);
    ++report.epochs_run;
    if (report.epochs_run == 1 || val_loss < report.best_val_loss) {
      report.best_val_loss = val_loss;
      report.best_epoch = epoch;
      best_lambda = lambda;
      since_best = 0;
    } else if (++since_best >= hyper.patience) {
      report.stopped_early = true;
      break;
    }
  }

  const Eigen::VectorXd c = coefficients(best_lambda);
  model.weights = dual ? Eigen::VectorXd(z.transpose() * (evecs * c)) : Eigen::VectorXd(evecs * c);
  model.bias = y_mean;
  model.lambda = best_lambda;
  return {std::move(model), std::move(report)};
}

TrainResult train_mlp(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                      const Eigen::MatrixXd& zv, const Eigen::VectorXd& yv,
                      const TrainHyper& hyper, RegressorModel model) {
  RegressorModel net = init_mlp(model.resolution, hyper.hidden, derive_seed(hyper.seed, 0x1a17),
                                model.feature_mean, model.feature_std);
  net.provenance = model.provenance;

  Eigen::VectorXd theta = flatten_parameters(net);
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(theta.size());
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double adam_eps = 1e-8;
  long step = 0;

  std::mt19937_64 shuffle_rng(derive_seed(hyper.seed, 0x5eed));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(z.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto batch = static_cast<Eigen::Index>(std::max(1, hyper.batch_size));

  TrainReport report;
  Eigen::VectorXd best_theta = theta;
  int since_best = 0;
  Eigen::VectorXd grad;
  for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (Eigen::Index start = 0; start < z.rows(); start += batch) {
      const Eigen::Index len = std::min(batch, z.rows() - start);
      Eigen::MatrixXd xb(len, z.cols());
      Eigen::VectorXd yb(len);
      for (Eigen::Index i = 0; i < len; ++i) {
        xb.row(i) = z.row(order[static_cast<std::size_t>(start + i)]);
        yb(i) = y(order[static_cast<std::size_t>(start + i)]);
      }
      mlp_loss(net, xb, yb, &grad);
      ++step;
      m1 = beta1 * m1 + (1.0 - beta1) * grad;
      m2 = beta2 * m2 + (1.0 - beta2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      theta.array() -= hyper.learning_rate *
                       ((m1.array() / c1) / ((m2.array() / c2).sqrt() + adam_eps) +
                        hyper.lambda * theta.array());
      unflatten_parameters(net, theta);
    }
    const double train_loss = mse(mlp_forward(net, z), y);
    const double val_loss = mse(mlp_forward(net, zv), yv);
    report.train_curve.push_back(train_loss);
    report.val_curve.push_back(val_loss);
    ++report.epochs_run;
    if (report.epochs_run == 1 || val_loss < report.best_val_loss) {
      report.best_val_loss = val_loss;
      report.best_epoch = epoch;
      best_theta = theta;
      since_best = 0;
    } else if (++since_best >= hyper.patience) {
      report.stopped_early = true;
      break;
    }
  }
  unflatten_parameters(net, best_theta);
  return {std::move(net), std::move(report)};
}

}  // namespace

std::map<int, std::vector<std::size_t>> Dataset::groups() const {
  std::map<int, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < samples.size(); ++i) out[samples[i].insertion_id].push_back(i);
  return out;
}

Dataset Dataset::with_insertions(const std::vector<int>& ids) const {
  const std::set<int> keep(ids.begin(), ids.end());
  Dataset out{resolution, style, cameras, {}};
  for (const auto& s : samples) {
    if (keep.count(s.insertion_id)) out.samples.push_back(s);
  }
  return out;
}

Dataset Dataset::for_camera(int camera_index) const {
  Dataset out{resolution, style, cameras, {}};
  for (const auto& s : samples) {
    if (s.camera_index == camera_index) out.samples.push_back(s);
  }
  return out;
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Oracle: return "oracle";
    case ModelKind::Ridge: return "ridge";
    case ModelKind::Mlp: return "mlp";
  }
  return "ridge";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "oracle") return ModelKind::Oracle;
  if (name == "ridge") return ModelKind::Ridge;
  if (name == "mlp") return ModelKind::Mlp;
  throw Error(ErrorKind::InvalidConfig, "unknown model kind '" + std::string(name) + "'");
}

std::size_t RegressorModel::parameter_count() const {
  switch (kind) {
    case ModelKind::Oracle: return 0;
    case ModelKind::Ridge: return static_cast<std::size_t>(weights.size()) + 1;
    case ModelKind::Mlp: {
      std::size_t n = 0;
      for (std::size_t i = 0; i < layer_weights.size(); ++i) {
        n += static_cast<std::size_t>(layer_weights[i].size() + layer_biases[i].size());
      }
      return n;
    }
  }
  return 0;
}

RegressorModel RegressorModel::oracle(double noise_sigma, int resolution) {
  RegressorModel m;
  m.kind = ModelKind::Oracle;
  m.noise_sigma = noise_sigma;
  m.resolution = resolution;
  return m;
}

RegressorModel RegressorModel::constant(double value, int resolution) {
  RegressorModel m;
  m.kind = ModelKind::Ridge;
  m.resolution = resolution;
  m.feature_mean = Eigen::VectorXd::Zero(m.feature_count());
  m.feature_std = Eigen::VectorXd::Ones(m.feature_count());
  m.weights = Eigen::VectorXd::Zero(m.feature_count());
  m.bias = value;
  return m;
}

Eigen::VectorXd image_features(const Observation& obs) {
  const std::size_t n = obs.pixels.size();
  if (n == 0 || n != static_cast<std::size_t>(obs.resolution) * static_cast<std::size_t>(obs.resolution)) {
    throw Error(ErrorKind::ShapeMismatch, "observation pixel count does not match its resolution");
  }
  std::vector<float> sorted(obs.pixels);
  std::sort(sorted.begin(), sorted.end());
  const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (double(sorted[n / 2 - 1]) + sorted[n / 2]);
  const std::size_t k = std::min<std::size_t>(kExtremePixels, n);
  double lo = 0.0;
  double hi = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    lo += sorted[i];
    hi += sorted[n - 1 - i];
  }
  lo /= static_cast<double>(k);
  hi /= static_cast<double>(k);
  const double bright_scale = 1.0 / std::max(hi - median, kMinContrast);
  const double dark_scale = 1.0 / std::max(median - lo, kMinContrast);

  // Column profiles of the bright and dark channels and their running sums.
  // Peg height only moves the glyph along image rows, so the profiles keep
  // the error direction and drop the height.
  const int r = obs.resolution;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(4 * r);
  for (int row = 0; row < r; ++row) {
    for (int col = 0; col < r; ++col) {
      const double d = static_cast<double>(obs.at(row, col)) - median;
      if (d > kNoiseFloor) {
        f(col) += (d - kNoiseFloor) * bright_scale;
      } else if (d < -kNoiseFloor) {
        f(r + col) -= (d + kNoiseFloor) * dark_scale;
      }
    }
  }
  for (int col = 0; col < r; ++col) {
    f(2 * r + col) = f(col) + (col > 0 ? f(2 * r + col - 1) : 0.0);
    f(3 * r + col) = f(r + col) + (col > 0 ? f(3 * r + col - 1) : 0.0);
  }
  // Normalizing the running sums by channel mass makes each glyph's centroid a
  // linear function of the features, independent of its size and contrast.
  const double bright_mass = std::max(f(3 * r - 1), kMinMass);
  const double dark_mass = std::max(f(4 * r - 1), kMinMass);
  f.segment(2 * r, r) /= bright_mass;
  f.segment(3 * r, r) /= dark_mass;
  return f;
}

Eigen::MatrixXd feature_matrix(const Dataset& data) {
  const auto d = static_cast<Eigen::Index>(4 * data.resolution);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(data.samples.size()), d);
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const auto& obs = data.samples[i].observation;
    if (obs.resolution != data.resolution) {
      throw Error(ErrorKind::ShapeMismatch, "sample resolution differs from dataset resolution");
    }
    x.row(static_cast<Eigen::Index>(i)) = image_features(obs).transpose();
  }
  return x;
}

Eigen::MatrixXd standardize(const RegressorModel& model, const Eigen::MatrixXd& raw) {
  if (raw.cols() != model.feature_mean.size()) {
    throw Error(ErrorKind::ShapeMismatch, "feature count does not match the model");
  }
  return (raw.rowwise() - model.feature_mean.transpose()).array().rowwise() /
         model.feature_std.transpose().array();
}

double predict(const RegressorModel& model, const Observation& obs, std::mt19937_64* rng) {
  if (model.kind == ModelKind::Oracle) {
    if (!obs.truth_y) {
      throw Error(ErrorKind::InvalidConfig, "oracle model needs an observation with simulated truth");
    }
    double y = *obs.truth_y;
    if (model.noise_sigma > 0.0) {
      if (rng == nullptr) throw Error(ErrorKind::InvalidConfig, "noisy oracle needs a generator");
      y += std::normal_distribution<double>(0.0, model.noise_sigma)(*rng);
    }
    return y;
  }
  check_resolution(model, obs.resolution);
  const Eigen::MatrixXd z = standardize(model, image_features(obs).transpose());
  return predict_rows(model, z)(0);
}

TrainResult train(const Dataset& train_data, const Dataset& val_data, const TrainHyper& hyper) {
  check_train_inputs(train_data, val_data);
  RegressorModel model;
  model.kind = hyper.kind;
  model.resolution = train_data.resolution;
  model.provenance["style"] = std::string(to_string(train_data.style));
  model.provenance["train_samples"] = std::to_string(train_data.samples.size());
  model.provenance["val_samples"] = std::to_string(val_data.samples.size());
  model.provenance["seed"] = std::to_string(hyper.seed);

  const Eigen::VectorXd y = labels_of(train_data);
  const Eigen::VectorXd yv = labels_of(val_data);

  if (hyper.kind == ModelKind::Oracle) {
    model.noise_sigma = 0.0;
    TrainReport report;
    const Metrics m = evaluate(model, val_data);
    report.epochs_run = 1;
    report.best_val_loss = m.mse;
    report.train_curve = {evaluate(model, train_data).mse};
    report.val_curve = {m.mse};
    return {std::move(model), std::move(report)};
  }

  const Eigen::MatrixXd x = feature_matrix(train_data);
  fit_standardization(x, model.feature_mean, model.feature_std);
  const Eigen::MatrixXd z = standardize(model, x);
  const Eigen::MatrixXd zv = standardize(model, feature_matrix(val_data));

  if (hyper.kind == ModelKind::Ridge) return train_ridge(z, y, zv, yv, hyper, std::move(model));
  return train_mlp(z, y, zv, yv, hyper, std::move(model));
}

Metrics evaluate(const RegressorModel& model, const Dataset& data, std::uint64_t seed) {
  if (data.empty()) throw Error(ErrorKind::EmptyDataset, "cannot evaluate on an empty dataset");
  Eigen::VectorXd pred(static_cast<Eigen::Index>(data.samples.size()));
  if (model.kind == ModelKind::Oracle) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
      pred(static_cast<Eigen::Index>(i)) = predict(model, data.samples[i].observation, &rng);
    }
  } else {
    check_resolution(model, data.resolution);
    pred = predict_rows(model, standardize(model, feature_matrix(data)));
  }
  Metrics m;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const auto& s = data.samples[i];
    const double diff = pred(static_cast<Eigen::Index>(i)) - s.label;
    m.mse += diff * diff;
    m.mae += std::abs(diff);
    m.mae_mm_at_nominal +=
        denormalize_error(std::abs(diff), data.cameras.at(static_cast<std::size_t>(s.camera_index)));
  }
  const auto n = static_cast<double>(data.samples.size());
  m.mse /= n;
  m.mae /= n;
  m.mae_mm_at_nominal /= n;
  return m;
}

double mlp_loss(const RegressorModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                Eigen::VectorXd* gradient) {
  if (model.kind != ModelKind::Mlp) {
    throw Error(ErrorKind::NotDifferentiableKind, "loss gradients are only defined for mlp models");
  }
  std::vector<Eigen::MatrixXd> acts;
  const Eigen::VectorXd pred = mlp_forward(model, x, gradient ? &acts : nullptr);
  const auto n = static_cast<double>(y.size());
  const Eigen::VectorXd resid = pred - y;
  const double loss = resid.squaredNorm() / n;
  if (!gradient) return loss;

  const std::size_t n_layers = model.layer_weights.size();
  std::vector<Eigen::MatrixXd> grad_w(n_layers);
  std::vector<Eigen::VectorXd> grad_b(n_layers);
  Eigen::MatrixXd delta = (2.0 / n) * resid;  // dL / d(output pre-activation)
  for (std::size_t i = n_layers; i-- > 0;) {
    grad_w[i] = delta.transpose() * acts[i];
    grad_b[i] = delta.colwise().sum().transpose();
    if (i > 0) {
      Eigen::MatrixXd back = delta * model.layer_weights[i];
      delta = back.array() * (acts[i].array() > 0.0).cast<double>();
    }
  }
  gradient->resize(static_cast<Eigen::Index>(model.parameter_count()));
  Eigen::Index off = 0;
  for (std::size_t i = 0; i < n_layers; ++i) {
    gradient->segment(off, grad_w[i].size()) = grad_w[i].reshaped();
    off += grad_w[i].size();
    gradient->segment(off, grad_b[i].size()) = grad_b[i];
    off += grad_b[i].size();
  }
  return loss;
}

Eigen::VectorXd flatten_parameters(const RegressorModel& model) {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(model.parameter_count()));
  Eigen::Index off = 0;
  if (model.kind == ModelKind::Ridge) {
    theta.head(model.weights.size()) = model.weights;
    theta(model.weights.size()) = model.bias;
    return theta;
  }
  for (std::size_t i = 0; i < model.layer_weights.size(); ++i) {
    theta.segment(off, model.layer_weights[i].size()) = model.layer_weights[i].reshaped();
    off += model.layer_weights[i].size();
    theta.segment(off, model.layer_biases[i].size()) = model.layer_biases[i];
    off += model.layer_biases[i].size();
  }
  return theta;
}

void unflatten_parameters(RegressorModel& model, const Eigen::VectorXd& theta) {
  if (static_cast<std::size_t>(theta.size()) != model.parameter_count()) {
    throw Error(ErrorKind::ShapeMismatch, "parameter vector has the wrong length");
  }
  if (model.kind == ModelKind::Ridge) {
    model.weights = theta.head(theta.size() - 1);
    model.bias = theta(theta.size() - 1);
    return;
  }
  Eigen::Index off = 0;
  for (std::size_t i = 0; i < model.layer_weights.size(); ++i) {
    auto& w = model.layer_weights[i];
    w = theta.segment(off, w.size()).reshaped(w.rows(), w.cols());
    off += w.size();
    auto& b = model.layer_biases[i];
    b = theta.segment(off, b.size());
    off += b.size();
  }
}

RegressorModel init_mlp(int resolution, const std::vector<int>& hidden, std::uint64_t seed,
                        const Eigen::VectorXd& feature_mean, const Eigen::VectorXd& feature_std) {
  RegressorModel m;
  m.kind = ModelKind::Mlp;
  m.resolution = resolution;
  m.feature_mean = feature_mean;
  m.feature_std = feature_std;
  m.layer_sizes.push_back(static_cast<int>(feature_mean.size()));
  for (const int h : hidden) m.layer_sizes.push_back(h);
  m.layer_sizes.push_back(1);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i + 1 < m.layer_sizes.size(); ++i) {
    const int fan_in = m.layer_sizes[i];
    const int fan_out = m.layer_sizes[i + 1];
    const bool output = i + 2 == m.layer_sizes.size();
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in)) * (output ? kOutputInitScale : 1.0);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = sd * normal(rng);
    }
    m.layer_weights.push_back(std::move(w));
    m.layer_biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return m;
}

double gradient_check(const RegressorModel& model, const Eigen::MatrixXd& x,
                      const Eigen::VectorXd& y, int n_params, std::uint64_t seed) {
  if (model.kind != ModelKind::Mlp) {
    throw Error(ErrorKind::NotDifferentiableKind, "gradient check requires an mlp model");
  }
  constexpr double kStep = 1e-5;
  constexpr double kFloor = 1e-7;
  Eigen::VectorXd analytic;
  mlp_loss(model, x, y, &analytic);

  RegressorModel probe = model;
  const Eigen::VectorXd theta = flatten_parameters(model);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, theta.size() - 1);
  double worst = 0.0;
  for (int k = 0; k < n_params; ++k) {
    const Eigen::Index i = pick(rng);
    Eigen::VectorXd t = theta;
    t(i) = theta(i) + kStep;
    unflatten_parameters(probe, t);
    const double plus = mlp_loss(probe, x, y);
    t(i) = theta(i) - kStep;
    unflatten_parameters(probe, t);
    const double minus = mlp_loss(probe, x, y);
    const double numeric = (plus - minus) / (2.0 * kStep);
    const double denom = std::max({std::abs(analytic(i)), std::abs(numeric), kFloor});
    worst = std::max(worst, std::abs(analytic(i) - numeric) / denom);
  }
  return worst;
}

double gradient_check(const RegressorModel& model, const Dataset& batch, int n_params,
                      std::uint64_t seed) {
  if (model.kind != ModelKind::Mlp) {
    throw Error(ErrorKind::NotDifferentiableKind, "gradient check requires an mlp model");
  }
  return gradient_check(model, standardize(model, feature_matrix(batch)), labels_of(batch),
                        n_params, seed);
}

}  // namespace ipvs
