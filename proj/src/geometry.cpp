#include "ipvs/geometry.hpp"

#include "ipvs/errors.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <cmath>
#include <string>

namespace ipvs {

namespace {

constexpr double kUnitTol = 1e-9;

}  // namespace

CameraModel CameraModel::look_at(const Vec3& position, const Vec3& target, const Vec3& l,
                                 double focal_length, int resolution) {
  const Vec3 view = target - position;
  CameraModel cam;
  cam.position = position;
  const Vec3 x_axis = error_direction(l, view);
  const Vec3 z_axis = view.normalized();
  const Vec3 y_axis = z_axis.cross(x_axis);
  cam.orientation.row(0) = x_axis.transpose();
  cam.orientation.row(1) = y_axis.transpose();
  cam.orientation.row(2) = z_axis.transpose();
  cam.focal_length = focal_length;
  cam.resolution = resolution;
  cam.nominal_depth = view.norm();
  return cam;
}

void CameraModel::validate() const {
  if (!(focal_length > 0.0) || resolution <= 0 || !(nominal_depth > 0.0)) {
    throw Error(ErrorKind::InvalidConfig,
                "camera requires focal_length > 0, resolution > 0, nominal_depth > 0");
  }
  for (int i = 0; i < 3; ++i) {
    if (std::abs(orientation.row(i).norm() - 1.0) > kUnitTol) {
      throw Error(ErrorKind::InvalidConfig, "camera orientation rows must be unit length");
    }
    for (int j = i + 1; j < 3; ++j) {
      if (std::abs(orientation.row(i).dot(orientation.row(j))) > kUnitTol) {
        throw Error(ErrorKind::InvalidConfig, "camera orientation rows must be orthogonal");
      }
    }
  }
}

Vec3 error_direction(const Vec3& l, const Vec3& view) {
  const Vec3 c = l.cross(view);
  const double n = c.norm();
  if (n <= 1e-9 * view.norm()) {
    throw Error(ErrorKind::DegenerateView, "view vector is parallel to the insertion direction");
  }
  return c / n;
}

double normalize_error(double q_mm, const CameraModel& cam) {
  return q_mm * cam.focal_length / (cam.resolution * cam.nominal_depth);
}

double denormalize_error(double y, const CameraModel& cam) {
  return y * cam.resolution * cam.nominal_depth / cam.focal_length;
}

Reconstruction reconstruct_error(std::span<const Vec3> dirs, std::span<const double> qs) {
  if (dirs.size() != qs.size()) {
    throw Error(ErrorKind::ShapeMismatch, "direction and scalar error counts differ");
  }
  if (dirs.size() < 2) {
    throw Error(ErrorKind::InsufficientViews,
                "need at least 2 views, got " + std::to_string(dirs.size()));
  }
  const auto n = static_cast<Eigen::Index>(dirs.size());
  Eigen::MatrixX3d U(n, 3);
  Eigen::VectorXd q(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    U.row(i) = dirs[static_cast<std::size_t>(i)].transpose();
    q(i) = qs[static_cast<std::size_t>(i)];
  }

  Eigen::JacobiSVD<Eigen::MatrixX3d> svd(U, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  Reconstruction out;
  const Eigen::VectorXd uq = svd.matrixU().transpose() * q;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(0) > 0.0 && s(i) / s(0) > kRankThreshold) {
      out.error += svd.matrixV().col(i) * (uq(i) / s(i));
      ++out.rank;
    }
  }
  out.ill_conditioned = out.rank < 2;
  return out;
}

Vec3 to_camera_frame(const CameraModel& cam, const Vec3& world_point) {
  return cam.orientation * (world_point - cam.position);
}

Vec2 project(const CameraModel& cam, const Vec3& world_point) {
  const Vec3 pc = to_camera_frame(cam, world_point);
  if (pc.z() <= 0.0) {
    throw Error(ErrorKind::BehindCamera, "point has non-positive depth in the camera frame");
  }
  const double half = 0.5 * cam.resolution;
  return {cam.focal_length * pc.x() / pc.z() + half, cam.focal_length * pc.y() / pc.z() + half};
}

std::pair<Vec3, Vec3> plane_basis(const Vec3& l) {
  // Seed with the world axis least aligned with l.
  Vec3 seed = Vec3::UnitX();
  if (std::abs(l.x()) > std::abs(l.y()) || std::abs(l.x()) > std::abs(l.z())) {
    seed = std::abs(l.y()) <= std::abs(l.z()) ? Vec3::UnitY() : Vec3::UnitZ();
  }
  const Vec3 a = in_plane(seed, l).normalized();
  const Vec3 b = a.cross(l);
  return {a, b};
}

}  // namespace ipvs
