#include "ipvs/errors.hpp"
#include "ipvs/geometry.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <gtest/gtest.h>

#include <random>

using namespace ipvs;

namespace {

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(rng), n(rng), n(rng));
  return v.normalized();
}

CameraModel simple_camera(double f = 1000.0, int r = 64, double z = 500.0) {
  CameraModel cam;
  cam.focal_length = f;
  cam.resolution = r;
  cam.nominal_depth = z;
  return cam;
}

}  // namespace

TEST(ErrorDirection, HandCrossProducts) {
  const Vec3 l(0, 0, -1);
  EXPECT_TRUE(error_direction(l, Vec3(0, 1, 0.5)).isApprox(Vec3(1, 0, 0), 1e-12));
  EXPECT_TRUE(error_direction(l, Vec3(1, 0, 1)).isApprox(Vec3(0, -1, 0), 1e-12));
}

TEST(ErrorDirection, ParallelViewIsDegenerate) {
  try {
    error_direction(Vec3(0, 0, -1), Vec3(0, 0, 2));
    FAIL() << "expected DegenerateView";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateView);
  }
}

TEST(ErrorDirection, UnitAndPerpendicularForRandomInputs) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10000; ++i) {
    const Vec3 l = random_unit(rng);
    const Vec3 v = 10.0 * random_unit(rng);
    const Vec3 u = error_direction(l, v);
    EXPECT_NEAR(u.norm(), 1.0, 1e-9);
    EXPECT_NEAR(u.dot(l), 0.0, 1e-9);
  }
}

TEST(ScalarError, Examples) {
  EXPECT_DOUBLE_EQ(scalar_error(Vec3(1, 0, 0), Vec3(1, 0, 0)), 1.0);
  EXPECT_DOUBLE_EQ(scalar_error(Vec3(0.3, -0.2, 0), Vec3(0, 1, 0)), -0.2);
  EXPECT_NEAR(scalar_error(Vec3(0.3, 0.4, 0), Vec3(0.6, 0.8, 0)), 0.5, 1e-15);
}

TEST(Normalization, Examples) {
  const CameraModel cam = simple_camera();
  EXPECT_EQ(normalize_error(0.0, cam), 0.0);
  EXPECT_DOUBLE_EQ(normalize_error(0.5, cam), 0.015625);
  EXPECT_DOUBLE_EQ(denormalize_error(0.015625, cam), 0.5);
}

TEST(Normalization, RoundTripAndLinearity) {
  const CameraModel cam = simple_camera(2400.0, 64, 150.0);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> q(-10.0, 10.0);
  for (int i = 0; i < 10000; ++i) {
    const double value = q(rng);
    const double back = denormalize_error(normalize_error(value, cam), cam);
    EXPECT_LE(std::abs(back - value), 1e-12 * std::max(1.0, std::abs(value)));
    EXPECT_NEAR(normalize_error(2.0 * value, cam), 2.0 * normalize_error(value, cam), 1e-14);
  }
}

TEST(Reconstruction, OrthonormalRows) {
  const std::vector<Vec3> u = {Vec3(1, 0, 0), Vec3(0, 1, 0)};
  const std::vector<double> q = {0.3, -0.2};
  const Reconstruction r = reconstruct_error(u, q);
  EXPECT_TRUE(r.error.isApprox(Vec3(0.3, -0.2, 0), 1e-12));
  EXPECT_EQ(r.rank, 2);
  EXPECT_FALSE(r.ill_conditioned);
}

TEST(Reconstruction, ObliqueRowsHandElimination) {
  const std::vector<Vec3> u = {Vec3(1, 0, 0), Vec3(0.5, 0.86603, 0)};
  const std::vector<double> q = {0.1, 0.2};
  const Reconstruction r = reconstruct_error(u, q);
  EXPECT_NEAR(r.error.x(), 0.1, 1e-4);
  EXPECT_NEAR(r.error.y(), 0.17320, 1e-4);
  EXPECT_NEAR(r.error.z(), 0.0, 1e-12);
}

TEST(Reconstruction, ParallelRowsFlaggedWithMinimumNorm) {
  const std::vector<Vec3> u = {Vec3(1, 0, 0), Vec3(1, 0, 0)};
  const std::vector<double> q = {0.2, 0.4};
  const Reconstruction r = reconstruct_error(u, q);
  EXPECT_TRUE(r.error.isApprox(Vec3(0.3, 0, 0), 1e-12));
  EXPECT_TRUE(r.ill_conditioned);
  EXPECT_EQ(r.rank, 1);
}

TEST(Reconstruction, ContractErrors) {
  const std::vector<Vec3> one = {Vec3(1, 0, 0)};
  const std::vector<double> q1 = {0.1};
  EXPECT_THROW(reconstruct_error(one, q1), Error);
  const std::vector<Vec3> two = {Vec3(1, 0, 0), Vec3(0, 1, 0)};
  EXPECT_THROW(reconstruct_error(two, q1), Error);
}

TEST(Reconstruction, RecoversRandomInPlaneErrors) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> n_cams(2, 4);
  for (int trial = 0; trial < 10000; ++trial) {
    const Vec3 l = random_unit(rng);
    const auto [a, b] = plane_basis(l);
    std::uniform_real_distribution<double> c(-2.0, 2.0);
    const Vec3 e = c(rng) * a + c(rng) * b;
    std::vector<Vec3> dirs;
    std::vector<double> qs;
    const int n = n_cams(rng);
    // Cameras spread around the insertion axis so the views are well separated.
    const double phase = std::uniform_real_distribution<double>(0.0, 6.28)(rng);
    for (int j = 0; j < n; ++j) {
      const double az = phase + 2.0 * 3.14159265 * j / (n == 2 ? 4 : n);
      const Vec3 view = -(std::cos(az) * a + std::sin(az) * b) + l;
      dirs.push_back(error_direction(l, view));
      qs.push_back(scalar_error(e, dirs.back()));
    }
    const Reconstruction r = reconstruct_error(dirs, qs);
    EXPECT_LE((r.error - e).norm(), 1e-9);
    EXPECT_LE(std::abs(r.error.dot(l)), 1e-9);
  }
}

TEST(Projection, Examples) {
  const CameraModel cam = simple_camera();
  const Vec2 p = project(cam, Vec3(0.05, 0, 500));
  EXPECT_NEAR(p.x(), 32.1, 1e-12);
  EXPECT_NEAR(p.y(), 32.0, 1e-12);
  const Vec2 c = project(cam, Vec3(0, 0, 123));
  EXPECT_DOUBLE_EQ(c.x(), 32.0);
  EXPECT_DOUBLE_EQ(c.y(), 32.0);
  try {
    project(cam, Vec3(1, 0, 0));
    FAIL() << "expected BehindCamera";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BehindCamera);
  }
}

TEST(CameraModel, LookAtConvention) {
  const Vec3 l(0, 0, -1);
  const CameraModel cam = CameraModel::look_at(Vec3(0, -100, 100), Vec3::Zero(), l, 2400.0, 64);
  EXPECT_NO_THROW(cam.validate());
  const Vec3 v = (Vec3::Zero() - cam.position);
  EXPECT_TRUE(Vec3(cam.orientation.row(0).transpose()).isApprox(error_direction(l, v), 1e-12));
  EXPECT_TRUE(Vec3(cam.orientation.row(2).transpose()).isApprox(v.normalized(), 1e-12));
  EXPECT_NEAR(cam.nominal_depth, v.norm(), 1e-12);
  EXPECT_NEAR(cam.orientation.determinant(), 1.0, 1e-12);
}

TEST(CameraModel, ValidateRejectsBadValues) {
  CameraModel cam = simple_camera();
  cam.focal_length = 0.0;
  EXPECT_THROW(cam.validate(), Error);
  cam = simple_camera();
  cam.orientation(0, 0) = 2.0;
  EXPECT_THROW(cam.validate(), Error);
}

TEST(PlaneBasis, OrthonormalAndOriented) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 l = random_unit(rng);
    const auto [a, b] = plane_basis(l);
    EXPECT_NEAR(a.norm(), 1.0, 1e-12);
    EXPECT_NEAR(b.norm(), 1.0, 1e-12);
    EXPECT_NEAR(a.dot(l), 0.0, 1e-12);
    EXPECT_NEAR(b.dot(l), 0.0, 1e-12);
    EXPECT_TRUE(a.cross(b).isApprox(-l, 1e-12));
  }
  const auto [a, b] = plane_basis(Vec3(0, 0, -1));
  EXPECT_TRUE(a.isApprox(Vec3(1, 0, 0)));
  EXPECT_TRUE(b.isApprox(Vec3(0, 1, 0)));
}
