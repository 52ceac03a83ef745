#pragma once

// In-plane visual servoing loop.
//
// Each iteration captures one image per camera, predicts the normalized
// error y_j, converts it to the scalar error q_j along the camera's error
// direction u_j and solves U e = q in the least-squares sense. The TCP then
// moves by the reconstructed correction. Error directions and scales come
// from the nominal geometry, so calibration error enters exactly as it would
// on a real cell.

#include "ipvs/perception.hpp"
#include "ipvs/sim.hpp"

#include <string>
#include <vector>

namespace ipvs {

struct ServoConfig {
  int n_iters = 3;
  // One model per camera, or a single model shared by all cameras.
  std::vector<RegressorModel> models;
  double clamp_mm = 2.0;
  TimingModel timing;

  const RegressorModel& model_for(int camera_index) const;
  // Throws InvalidConfig / ModelsNotDeployed.
  void validate(std::size_t n_cameras) const;
};

struct CameraReading {
  double y = 0.0;
  double q = 0.0;  // mm
  Vec3 u = Vec3::Zero();
};

struct ServoStep {
  Vec3 new_tcp = Vec3::Zero();
  Vec3 correction = Vec3::Zero();  // applied, after clamping
  Vec3 estimate = Vec3::Zero();    // before clamping
  std::vector<CameraReading> per_camera;
  bool saturated = false;
  double residual_mm = 0.0;  // true in-plane error after the move, simulation only
  double time_s = 0.0;
};

// One iteration. Moves the world TCP and advances world.elapsed.
// Throws DegenerateView, IllConditioned.
ServoStep servo_step(WorldState& world, const ServoConfig& cfg);

// Time one iteration takes with the given camera count.
double servo_step_time(const TimingModel& timing, std::size_t n_cameras);

struct ServoResult {
  Vec3 final_tcp = Vec3::Zero();
  std::vector<double> residuals;  // mm, after each iteration
  std::vector<ServoStep> steps;
  double time_s = 0.0;
  bool saturated = false;
};

// Exactly cfg.n_iters iterations, no convergence exit.
ServoResult visual_servo(WorldState& world, const ServoConfig& cfg);

// iteration,camera,y,q_mm,ux,uy,uz,ex_mm,ey_mm,ez_mm,residual_mm
std::string servo_trace_csv(const std::vector<ServoStep>& steps);

}  // namespace ipvs
