#pragma once

// Camera and error geometry for in-plane servoing.
//
// Every camera j observes the in-plane error e (e . l = 0) only along its
// error direction u_j = (l x v_j) / |l x v_j|, where v_j is the view vector
// from the camera to the insertion. Each camera therefore yields one scalar
// q_j = e . u_j, and two or more cameras give a linear system U e = q that is
// solved in the least-squares sense.
//
// Units: millimeters for lengths, pixels for image quantities.

#include <Eigen/Core>

#include <span>
#include <utility>
#include <vector>

namespace ipvs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct CameraModel {
  Vec3 position = Vec3::Zero();
  // Rows are the camera x, y and optical axes expressed in the world frame.
  Mat3 orientation = Mat3::Identity();
  double focal_length = 1000.0;  // px
  int resolution = 64;           // px, square image
  double nominal_depth = 500.0;  // mm, camera to insertion

  // Camera at `position` looking at `target`. The image x-axis is the error
  // direction for insertion direction `l`, the optical axis points along the
  // view vector and y completes a right-handed frame. The nominal depth is the
  // distance to `target`.
  static CameraModel look_at(const Vec3& position, const Vec3& target, const Vec3& l,
                             double focal_length, int resolution);

  // Throws InvalidConfig when an invariant does not hold.
  void validate() const;
};

// u = l x view / |l x view|. Throws DegenerateView when the view is parallel to l.
Vec3 error_direction(const Vec3& l, const Vec3& view);

inline double scalar_error(const Vec3& e, const Vec3& u) { return e.dot(u); }

// y = q f / (r z)
double normalize_error(double q_mm, const CameraModel& cam);
// q = y r z / f
double denormalize_error(double y, const CameraModel& cam);

struct Reconstruction {
  Vec3 error = Vec3::Zero();
  int rank = 0;
  // Rows span fewer than two directions; only the component along the common
  // direction is determined.
  bool ill_conditioned = false;
};

// Ratio of smallest to largest kept singular value below which a direction is
// treated as unobserved.
inline constexpr double kRankThreshold = 1e-6;

// Minimum-norm least-squares solution of U e = q with rows u_j.
// Throws InsufficientViews for fewer than two rows.
Reconstruction reconstruct_error(std::span<const Vec3> dirs, std::span<const double> qs);

// Pinhole projection to continuous pixel coordinates; the principal point is
// (r/2, r/2). Throws BehindCamera for non-positive camera-frame depth.
Vec2 project(const CameraModel& cam, const Vec3& world_point);

// Camera-frame coordinates of a world point.
Vec3 to_camera_frame(const CameraModel& cam, const Vec3& world_point);

// Orthonormal in-plane basis (a, b) for insertion direction l, with
// a x b = -l. Deterministic for a given l.
std::pair<Vec3, Vec3> plane_basis(const Vec3& l);

// Component of v perpendicular to l.
inline Vec3 in_plane(const Vec3& v, const Vec3& l) { return v - v.dot(l) * l; }

}  // namespace ipvs
