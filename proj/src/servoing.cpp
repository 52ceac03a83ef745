#include "ipvs/servoing.hpp"

#include "ipvs/errors.hpp"
#include "ipvs/io.hpp"

namespace ipvs {

const RegressorModel& ServoConfig::model_for(int camera_index) const {
  if (models.size() == 1) return models.front();
  return models.at(static_cast<std::size_t>(camera_index));
}

void ServoConfig::validate(std::size_t n_cameras) const {
  if (n_iters < 1) throw Error(ErrorKind::InvalidConfig, "n_iters must be >= 1");
  if (!(clamp_mm > 0.0)) throw Error(ErrorKind::InvalidConfig, "clamp must be > 0");
  if (models.empty()) throw Error(ErrorKind::ModelsNotDeployed, "no models deployed for servoing");
  if (models.size() != 1 && models.size() != n_cameras) {
    throw Error(ErrorKind::InvalidConfig, "need one model per camera or one shared model");
  }
  if (n_cameras < 2) throw Error(ErrorKind::InsufficientViews, "servoing needs at least two cameras");
  timing.validate();
}

double servo_step_time(const TimingModel& timing, std::size_t n_cameras) {
  return static_cast<double>(n_cameras) * (timing.t_capture + timing.t_infer) + timing.t_move;
}

ServoStep servo_step(WorldState& world, const ServoConfig& cfg) {
  const auto& cameras = world.config.cameras;
  cfg.validate(cameras.size());

  ServoStep step;
  std::vector<Vec3> dirs;
  std::vector<double> qs;
  for (std::size_t j = 0; j < cameras.size(); ++j) {
    const auto cam_index = static_cast<int>(j);
    const Observation obs = render(world, cam_index, world.tcp);
    CameraReading r;
    r.y = predict(cfg.model_for(cam_index), obs, &world.rng);
    r.u = error_direction(world.l(), world.nominal_hole - cameras[j].position);
    r.q = denormalize_error(r.y, cameras[j]);
    dirs.push_back(r.u);
    qs.push_back(r.q);
    step.per_camera.push_back(r);
  }
  const Reconstruction rec = reconstruct_error(dirs, qs);
  if (rec.ill_conditioned) {
    throw Error(ErrorKind::IllConditioned, "camera error directions span fewer than two directions");
  }
  // Remove any rounding-level component along l so the move stays in plane.
  step.estimate = in_plane(rec.error, world.l());
  step.correction = step.estimate;
  const double norm = step.estimate.norm();
  if (norm > cfg.clamp_mm) {
    step.correction *= cfg.clamp_mm / norm;
    step.saturated = true;
  }
  step.new_tcp = world.tcp + step.correction;
  move_tcp(world, step.new_tcp);
  step.residual_mm = in_plane_error(world, world.tcp).norm();
  step.time_s = servo_step_time(cfg.timing, cameras.size());
  world.elapsed += step.time_s;
  return step;
}

ServoResult visual_servo(WorldState& world, const ServoConfig& cfg) {
  cfg.validate(world.config.cameras.size());
  ServoResult result;
  for (int i = 0; i < cfg.n_iters; ++i) {
    ServoStep step = servo_step(world, cfg);
    result.residuals.push_back(step.residual_mm);
    result.time_s += step.time_s;
    result.saturated = result.saturated || step.saturated;
    result.steps.push_back(std::move(step));
  }
  result.final_tcp = world.tcp;
  return result;
}

std::string servo_trace_csv(const std::vector<ServoStep>& steps) {
  std::string out = "iteration,camera,y,q_mm,ux,uy,uz,ex_mm,ey_mm,ez_mm,residual_mm\n";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    for (std::size_t j = 0; j < s.per_camera.size(); ++j) {
      const auto& r = s.per_camera[j];
      out += std::to_string(i) + "," + std::to_string(j) + "," + format_double(r.y) + "," +
             format_double(r.q) + "," + format_double(r.u.x()) + "," + format_double(r.u.y()) + "," +
             format_double(r.u.z()) + "," + format_double(s.correction.x()) + "," +
             format_double(s.correction.y()) + "," + format_double(s.correction.z()) + "," +
             format_double(s.residual_mm) + "\n";
    }
  }
  return out;
}

}  // namespace ipvs
