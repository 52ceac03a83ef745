#pragma once

// On-disk formats.
//
// Dataset directory:
//   meta.json   schema version, resolution, style, nominal cameras, insertion
//               grouping and per-sample label and truth fields
//   images.bin  all images in sample order, row-major float32 little endian
//
// Model directory:
//   model.json  kind, shapes, scalars and training provenance
//   weights.bin float32 little endian, in this order: feature_mean,
//               feature_std, then for ridge the weights, for mlp each layer's
//               weight matrix (column-major, out x in) followed by its bias

#include "ipvs/geometry.hpp"
#include "ipvs/perception.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace ipvs {

inline constexpr int kDatasetSchemaVersion = 1;
inline constexpr int kModelSchemaVersion = 1;

nlohmann::json to_json(const Vec3& v);
Vec3 vec3_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CameraModel& cam);
CameraModel camera_from_json(const nlohmann::json& j);

// Throws IoError / FormatError.
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

void save_model(const RegressorModel& model, const std::filesystem::path& dir);
RegressorModel load_model(const std::filesystem::path& dir);

// Whole-file helpers; throw IoError.
void write_file(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

// Shortest text that round-trips the double exactly.
std::string format_double(double v);

}  // namespace ipvs
