#pragma once

// Simulated robot cell for in-plane peg-in-hole insertion.
//
// A WorldState hides the ground truth (true hole, grasp offset, true camera
// poses) behind the nominal geometry the robot believes in. TCP motion is
// restricted to translations perpendicular to the insertion direction l;
// insertion attempts only report binary success.

#include "ipvs/geometry.hpp"
#include "ipvs/search.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace ipvs {

// Visual analogs of the five evaluated components.
enum class ComponentStyle { PH, LED, C1, DSUB, C2 };

inline constexpr std::array<ComponentStyle, 5> kAllStyles = {
    ComponentStyle::PH, ComponentStyle::LED, ComponentStyle::C1, ComponentStyle::DSUB,
    ComponentStyle::C2};

std::string_view to_string(ComponentStyle style);
// Throws InvalidConfig for unknown names.
ComponentStyle parse_style(std::string_view name);

struct TimingModel {
  double t_attempt = 0.25;   // s per insertion attempt, approach and retract included
  double t_capture = 0.083;  // s per image
  double t_infer = 0.067;    // s per image
  double t_move = 0.133;     // s per servo move

  // Proportionality constant of t = k (|e| / eps)^2 for a full spiral on the
  // isometric grid: t_attempt times the lattice density integrated over the
  // disc, 2 pi / (3 sqrt 3).
  double k() const;
  void validate() const;
};

// Two eye-to-hand cameras 150 mm from the hole at 45 degrees elevation,
// 90 degrees apart in azimuth, f = 2400 px, r = 64 px.
std::vector<CameraModel> default_cameras(const Vec3& hole, const Vec3& l);

struct WorldConfig {
  double tolerance = 0.1;                 // mm
  double hole_uncertainty_sigma = 0.02;   // mm, per in-plane axis
  double grasp_uncertainty_sigma = 0.02;  // mm, per in-plane axis
  double extra_error_radius = 1.0;        // mm, uniform disc
  Vec3 insertion_direction = Vec3(0.0, 0.0, -1.0);
  Vec3 nominal_hole = Vec3::Zero();
  std::vector<CameraModel> cameras = default_cameras(Vec3::Zero(), Vec3(0.0, 0.0, -1.0));
  ComponentStyle component_style = ComponentStyle::PH;
  std::uint64_t seed = 0;
  // Height of the peg above the hole plane while capturing servo images.
  double hover_height = 0.5;
  // Max angular error of the true camera positions about the hole.
  double camera_angle_error_deg = 0.0;
  // Planted failure: draw the peg with the background intensity.
  bool peg_matches_background = false;

  void validate() const;
};

struct Appearance {
  double background = 0.5;
  double peg_scale = 1.0;
  double hole_scale = 1.0;
};

struct WorldState {
  WorldConfig config;
  Vec3 true_hole = Vec3::Zero();
  Vec2 grasp_offset = Vec2::Zero();  // in plane basis (a, b)
  Vec2 extra_error = Vec2::Zero();   // in plane basis (a, b)
  Vec3 nominal_hole = Vec3::Zero();
  Vec3 tcp = Vec3::Zero();
  Mat3 orientation = Mat3::Identity();  // constant
  std::vector<CameraModel> true_cameras;
  Appearance appearance;
  Vec3 plane_a = Vec3::UnitX();
  Vec3 plane_b = Vec3::UnitY();
  std::mt19937_64 rng;
  int attempts = 0;
  double elapsed = 0.0;
  std::vector<Vec3> trajectory;

  const Vec3& l() const { return config.insertion_direction; }
  Vec3 from_plane(const Vec2& v) const { return v.x() * plane_a + v.y() * plane_b; }
  Vec2 to_plane(const Vec3& v) const { return {v.dot(plane_a), v.dot(plane_b)}; }
  // Nominal hole at hover height.
  Vec3 hover_tcp() const;
  // Nominal hole shifted by the sampled extra error, at hover height.
  Vec3 start_tcp() const;
  // Height of a TCP above the hole plane, along -l.
  double height_of(const Vec3& tcp) const;
};

struct Observation {
  int resolution = 0;
  int camera_index = 0;
  std::vector<float> pixels;  // row-major, values in [0, 1]
  // Simulation-only ground truth label, consumed by oracle models.
  std::optional<double> truth_y;

  float at(int row, int col) const {
    return pixels[static_cast<std::size_t>(row) * static_cast<std::size_t>(resolution) +
                  static_cast<std::size_t>(col)];
  }
};

struct InsertionOutcome {
  bool success = false;
  int attempts = 0;
  double simulated_time = 0.0;
  Vec3 final_tcp = Vec3::Zero();
  // In-plane distance from the start of the insertion to the successful position.
  double retrospective_error = 0.0;
  // Same, measured from the position after servoing; NaN when servoing was skipped.
  double post_servo_retrospective_error = 0.0;
  // Simulator truth, diagnostics only.
  double true_initial_error = 0.0;
  std::vector<double> servo_residuals;
  bool saturated = false;
  bool pattern_tolerance_mismatch = false;
};

// Throws InvalidConfig.
WorldState new_world(const WorldConfig& config);

// Moves the TCP; only in-plane displacements are accepted (OutOfPlaneMotion).
void move_tcp(WorldState& world, const Vec3& target);

Vec3 peg_center(const WorldState& world, const Vec3& tcp);

// True hole minus peg center, projected onto the plane. This is the
// correction the servo must apply.
Vec3 in_plane_error(const WorldState& world, const Vec3& tcp);

// Binary feedback: peg within tolerance of the true hole. Counts the attempt.
bool attempt_insertion(WorldState& world, const Vec3& tcp);

// Normalized error the true camera observes, y = normalize(e . u_true).
double true_label(const WorldState& world, int camera_index, const Vec3& tcp);

// Synthetic grayscale capture from a true camera. Deterministic in
// (seed, tcp, camera_index).
Observation render(const WorldState& world, int camera_index, const Vec3& tcp);

// Attempts the pattern offsets around start_tcp in order.
InsertionOutcome spiral_insert(WorldState& world, const Vec3& start_tcp,
                               const SearchPattern& pattern, const TimingModel& timing);

// Binary PGM (P5, 8-bit).
std::string to_pgm(const Observation& obs);

}  // namespace ipvs
