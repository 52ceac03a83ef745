#include "ipvs/errors.hpp"
#include "ipvs/pipeline.hpp"
#include "ipvs/servoing.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace ipvs;

namespace {

ServoConfig oracle_config(double sigma, int n_iters = 3) {
  ServoConfig cfg;
  cfg.n_iters = n_iters;
  cfg.models = {RegressorModel::oracle(sigma), RegressorModel::oracle(sigma)};
  return cfg;
}

// World whose peg starts with the given in-plane error magnitude at a seed-dependent angle.
WorldState world_with_error(std::uint64_t seed, double error_mm, double camera_error_deg = 0.0) {
  WorldConfig cfg;
  cfg.seed = seed;
  cfg.camera_angle_error_deg = camera_error_deg;
  WorldState w = new_world(cfg);
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(seed % 97) / 97.0;
  const Vec3 aligned = w.hover_tcp() + in_plane(w.true_hole - peg_center(w, w.hover_tcp()), w.l());
  w.tcp = aligned - w.from_plane(error_mm * Vec2(std::cos(angle), std::sin(angle)));
  w.trajectory = {w.tcp};
  return w;
}

}  // namespace

TEST(ServoStep, NoiselessOracleZeroesErrorInOneStep) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    WorldState w = world_with_error(seed, 1.0);
    ASSERT_NEAR(in_plane_error(w, w.tcp).norm(), 1.0, 1e-12);
    const ServoStep step = servo_step(w, oracle_config(0.0));
    EXPECT_LE(step.residual_mm, 1e-9);
    EXPECT_FALSE(step.saturated);
    EXPECT_EQ(step.per_camera.size(), 2u);
  }
}

TEST(ServoStep, ClampSaturatesLargeCorrections) {
  WorldState w = world_with_error(3, 5.0);
  const Vec3 before = w.tcp;
  const ServoStep step = servo_step(w, oracle_config(0.0));
  EXPECT_TRUE(step.saturated);
  EXPECT_NEAR(step.correction.norm(), 2.0, 1e-12);
  EXPECT_NEAR(step.estimate.norm(), 5.0, 1e-9);
  EXPECT_TRUE(step.correction.normalized().isApprox(step.estimate.normalized(), 1e-12));
  EXPECT_TRUE((w.tcp - before).isApprox(step.correction, 1e-12));
}

TEST(ServoStep, NoisyOracleResidualIndependentOfStart) {
  int good = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    WorldState w = world_with_error(seed, 1.0);
    if (servo_step(w, oracle_config(0.001)).residual_mm < 0.2) ++good;
  }
  EXPECT_EQ(good, 100);
}

TEST(ServoStep, TimeAccounting) {
  const TimingModel t;
  EXPECT_DOUBLE_EQ(servo_step_time(t, 2), 2.0 * (t.t_capture + t.t_infer) + t.t_move);
  WorldState w = world_with_error(1, 0.5);
  const ServoResult r = visual_servo(w, oracle_config(0.0));
  EXPECT_DOUBLE_EQ(r.time_s, 3.0 * (2.0 * (t.t_capture + t.t_infer) + t.t_move));
  EXPECT_NEAR(r.time_s, 1.299, 1e-12);
  EXPECT_DOUBLE_EQ(w.elapsed, r.time_s);
}

TEST(ServoStep, IllConditionedCameras) {
  WorldConfig cfg;
  cfg.cameras = {cfg.cameras[0], cfg.cameras[0]};
  WorldState w = new_world(cfg);
  try {
    servo_step(w, oracle_config(0.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IllConditioned);
  }
}

TEST(ServoConfig, Validation) {
  ServoConfig cfg = oracle_config(0.0);
  cfg.n_iters = 0;
  EXPECT_THROW(cfg.validate(2), Error);
  cfg = oracle_config(0.0);
  cfg.models.resize(3);
  EXPECT_THROW(cfg.validate(2), Error);
  cfg = oracle_config(0.0);
  cfg.models.resize(1);
  EXPECT_NO_THROW(cfg.validate(2));  // one shared model serves every camera
}

TEST(VisualServo, FixedIterationCountAndExactness) {
  WorldState w = world_with_error(2, 0.8);
  const ServoResult r = visual_servo(w, oracle_config(0.0));
  ASSERT_EQ(r.residuals.size(), 3u);
  ASSERT_EQ(r.steps.size(), 3u);
  for (double res : r.residuals) EXPECT_LE(res, 1e-9);
  EXPECT_EQ(r.final_tcp, w.tcp);
}

TEST(VisualServo, CorrectionsStayInPlane) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    WorldState w = world_with_error(seed, 1.0, 2.0);
    visual_servo(w, oracle_config(0.002));
    for (std::size_t k = 1; k < w.trajectory.size(); ++k) {
      EXPECT_LE(std::abs((w.trajectory[k] - w.trajectory[k - 1]).dot(w.l())), 1e-9);
    }
  }
}

TEST(VisualServo, MoreIterationsDoNotHurt) {
  double one = 0.0, three = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    WorldState a = world_with_error(seed, 1.0, 2.0);
    WorldState b = a;
    one += visual_servo(a, oracle_config(0.002, 1)).residuals.back();
    three += visual_servo(b, oracle_config(0.002, 3)).residuals.back();
  }
  EXPECT_LE(three, one);
}

TEST(VisualServo, ContractsUnderCameraMiscalibration) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    for (double e0 : {0.2, 0.5, 1.0}) {
      WorldState w = world_with_error(seed, e0, 2.0);
      const double before = in_plane_error(w, w.tcp).norm();
      const ServoStep step = servo_step(w, oracle_config(0.0));
      EXPECT_LT(step.residual_mm / before, 0.3) << "seed " << seed << " e0 " << e0;
    }
  }
}

TEST(VisualServo, TrainedModelsReachFiveHundredthsOfAMillimetre) {
  WorldConfig world;
  world.seed = 77;
  const ConfigureResult cr =
      configure(make_world_factory(world), CollectionConfig{}, generate_pattern(world.tolerance, 1.5),
                TimingModel{}, TrainHyper{}, DeploymentGate{}, ConfigureOptions{false, 2, 1});
  ServoConfig cfg;
  cfg.models = cr.models;
  int good = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    WorldConfig wc = world;
    wc.seed = 1000 + seed;
    WorldState w = new_world(wc);
    if (visual_servo(w, cfg).residuals.back() <= 0.05) ++good;
  }
  EXPECT_GE(good, 45);
}

TEST(Trace, CsvLayout) {
  WorldState w = world_with_error(4, 0.5);
  const ServoResult r = visual_servo(w, oracle_config(0.0));
  const std::string csv = servo_trace_csv(r.steps);
  EXPECT_EQ(csv.rfind("iteration,camera,y,q_mm,ux,uy,uz,ex_mm,ey_mm,ez_mm,residual_mm\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 3 * 2);
}
