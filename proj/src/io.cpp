#include "ipvs/io.hpp"

#include "ipvs/errors.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ipvs {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

template <typename T>
T get(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorKind::FormatError, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("field '") + key + "': " + e.what());
  }
}

void append_floats(std::string& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto f = static_cast<float>(v(i));
    out.append(reinterpret_cast<const char*>(&f), sizeof f);
  }
}

class FloatReader {
 public:
  explicit FloatReader(std::string bytes) : bytes_(std::move(bytes)) {
    if (bytes_.size() % sizeof(float) != 0) {
      throw Error(ErrorKind::FormatError, "binary payload is not a whole number of float32 values");
    }
  }
  float next() {
    if (pos_ + sizeof(float) > bytes_.size()) throw Error(ErrorKind::FormatError, "binary payload too short");
    float f;
    std::memcpy(&f, bytes_.data() + pos_, sizeof f);
    pos_ += sizeof f;
    return f;
  }
  Eigen::VectorXd vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = next();
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_file(const fs::path& path, const std::string& contents) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorKind::IoError, "failed writing '" + path.string() + "'");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::FormatError, path.string() + ": " + e.what());
  }
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::FormatError, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json to_json(const CameraModel& cam) {
  json rows = json::array();
  for (int i = 0; i < 3; ++i) rows.push_back(to_json(Vec3(cam.orientation.row(i).transpose())));
  return {{"position", to_json(cam.position)},
          {"orientation_rows", rows},
          {"focal_length", cam.focal_length},
          {"resolution", cam.resolution},
          {"nominal_depth", cam.nominal_depth}};
}

CameraModel camera_from_json(const json& j) {
  CameraModel cam;
  cam.position = vec3_from_json(get<json>(j, "position"));
  const auto rows = get<json>(j, "orientation_rows");
  if (!rows.is_array() || rows.size() != 3) throw Error(ErrorKind::FormatError, "orientation_rows must hold 3 rows");
  for (int i = 0; i < 3; ++i) cam.orientation.row(i) = vec3_from_json(rows[static_cast<std::size_t>(i)]).transpose();
  cam.focal_length = get<double>(j, "focal_length");
  cam.resolution = get<int>(j, "resolution");
  cam.nominal_depth = get<double>(j, "nominal_depth");
  return cam;
}

void save_dataset(const Dataset& data, const fs::path& dir) {
  json meta;
  meta["schema_version"] = kDatasetSchemaVersion;
  meta["resolution"] = data.resolution;
  meta["style"] = std::string(to_string(data.style));
  meta["cameras"] = json::array();
  for (const auto& cam : data.cameras) meta["cameras"].push_back(to_json(cam));
  json groups = json::object();
  for (const auto& [id, idx] : data.groups()) groups[std::to_string(id)] = idx;
  meta["insertions"] = groups;

  std::string images;
  const std::size_t per_image = static_cast<std::size_t>(data.resolution) * static_cast<std::size_t>(data.resolution);
  images.reserve(data.samples.size() * per_image * sizeof(float));
  json samples = json::array();
  for (const auto& s : data.samples) {
    if (s.observation.pixels.size() != per_image) {
      throw Error(ErrorKind::ShapeMismatch, "sample image does not match dataset resolution");
    }
    json js = {{"insertion_id", s.insertion_id},
               {"camera_index", s.camera_index},
               {"label", s.label},
               {"q_truth_mm", s.q_truth_mm},
               {"height_mm", s.height_mm},
               {"offset_mm", {s.offset_mm.x(), s.offset_mm.y()}}};
    if (s.observation.truth_y) js["truth_y"] = *s.observation.truth_y;
    samples.push_back(std::move(js));
    images.append(reinterpret_cast<const char*>(s.observation.pixels.data()), per_image * sizeof(float));
  }
  meta["samples"] = std::move(samples);

  std::error_code ec;
  fs::create_directories(dir, ec);
  write_file(dir / "meta.json", meta.dump(1) + "\n");
  write_file(dir / "images.bin", images);
}

Dataset load_dataset(const fs::path& dir) {
  const json meta = read_json(dir / "meta.json");
  if (get<int>(meta, "schema_version") != kDatasetSchemaVersion) {
    throw Error(ErrorKind::FormatError, "unsupported dataset schema version");
  }
  Dataset data;
  data.resolution = get<int>(meta, "resolution");
  data.style = parse_style(get<std::string>(meta, "style"));
  for (const auto& c : get<json>(meta, "cameras")) data.cameras.push_back(camera_from_json(c));

  const std::string images = read_file(dir / "images.bin");
  const std::size_t per_image = static_cast<std::size_t>(data.resolution) * static_cast<std::size_t>(data.resolution);
  const auto& samples = get<json>(meta, "samples");
  if (images.size() != samples.size() * per_image * sizeof(float)) {
    throw Error(ErrorKind::FormatError, "images.bin size does not match the sample count");
  }
  std::size_t offset = 0;
  for (const auto& js : samples) {
    Sample s;
    s.insertion_id = get<int>(js, "insertion_id");
    s.camera_index = get<int>(js, "camera_index");
    s.label = get<double>(js, "label");
    s.q_truth_mm = get<double>(js, "q_truth_mm");
    s.height_mm = get<double>(js, "height_mm");
    const auto off = get<std::vector<double>>(js, "offset_mm");
    if (off.size() != 2) throw Error(ErrorKind::FormatError, "offset_mm must have two entries");
    s.offset_mm = Vec2(off[0], off[1]);
    s.observation.resolution = data.resolution;
    s.observation.camera_index = s.camera_index;
    s.observation.pixels.resize(per_image);
    std::memcpy(s.observation.pixels.data(), images.data() + offset, per_image * sizeof(float));
    offset += per_image * sizeof(float);
    if (js.contains("truth_y")) s.observation.truth_y = js["truth_y"].get<double>();
    data.samples.push_back(std::move(s));
  }
  return data;
}

void save_model(const RegressorModel& model, const fs::path& dir) {
  json meta;
  meta["schema_version"] = kModelSchemaVersion;
  meta["kind"] = std::string(to_string(model.kind));
  meta["resolution"] = model.resolution;
  meta["noise_sigma"] = model.noise_sigma;
  meta["feature_count"] = model.feature_mean.size();
  meta["bias"] = model.bias;
  meta["lambda"] = model.lambda;
  meta["layer_sizes"] = model.layer_sizes;
  meta["provenance"] = model.provenance;
  meta["weights_order"] =
      "feature_mean, feature_std, then ridge weights or per layer: weight (column-major, out x in), bias";

  std::string bin;
  append_floats(bin, model.feature_mean);
  append_floats(bin, model.feature_std);
  if (model.kind == ModelKind::Ridge) {
    append_floats(bin, model.weights);
  } else if (model.kind == ModelKind::Mlp) {
    for (std::size_t i = 0; i < model.layer_weights.size(); ++i) {
      append_floats(bin, model.layer_weights[i].reshaped());
      append_floats(bin, model.layer_biases[i]);
    }
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  write_file(dir / "model.json", meta.dump(1) + "\n");
  write_file(dir / "weights.bin", bin);
}

RegressorModel load_model(const fs::path& dir) {
  const json meta = read_json(dir / "model.json");
  if (get<int>(meta, "schema_version") != kModelSchemaVersion) {
    throw Error(ErrorKind::FormatError, "unsupported model schema version");
  }
  RegressorModel m;
  m.kind = parse_model_kind(get<std::string>(meta, "kind"));
  m.resolution = get<int>(meta, "resolution");
  m.noise_sigma = get<double>(meta, "noise_sigma");
  m.bias = get<double>(meta, "bias");
  m.lambda = get<double>(meta, "lambda");
  m.layer_sizes = get<std::vector<int>>(meta, "layer_sizes");
  m.provenance = get<std::map<std::string, std::string>>(meta, "provenance");
  const auto n_features = get<Eigen::Index>(meta, "feature_count");

  FloatReader in(read_file(dir / "weights.bin"));
  m.feature_mean = in.vector(n_features);
  m.feature_std = in.vector(n_features);
  if (m.kind == ModelKind::Ridge) {
    m.weights = in.vector(n_features);
  } else if (m.kind == ModelKind::Mlp) {
    for (std::size_t i = 0; i + 1 < m.layer_sizes.size(); ++i) {
      const Eigen::Index rows = m.layer_sizes[i + 1];
      const Eigen::Index cols = m.layer_sizes[i];
      m.layer_weights.push_back(in.vector(rows * cols).reshaped(rows, cols));
      m.layer_biases.push_back(in.vector(rows));
    }
  }
  if (!in.done()) throw Error(ErrorKind::FormatError, "weights.bin has trailing data");
  if (m.kind != ModelKind::Oracle && n_features != m.feature_count()) {
    throw Error(ErrorKind::ShapeMismatch, "feature count does not match the model resolution");
  }
  return m;
}

}  // namespace ipvs
