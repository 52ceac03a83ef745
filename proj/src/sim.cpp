#include "ipvs/sim.hpp"

#include "ipvs/errors.hpp"
#include "ipvs/random.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <string>
#include <tuple>

namespace ipvs {

namespace {

constexpr double kPlaneTol = 1e-9;
constexpr double kHoleIntensity = 0.1;
constexpr double kPegIntensity = 0.9;
constexpr double kPinIntensity = 0.6;
constexpr double kPixelNoise = 0.02;
constexpr double kEdgeWidthPx = 1.5;

struct Pin {
  double x, y, radius;  // mm, image axes relative to the peg center
};

struct Glyph {
  bool rectangular;
  double half_w, half_h;  // mm; radius = half_w for discs
  double hole_radius;     // mm
  std::vector<Pin> pins;
};

const Glyph& glyph_for(ComponentStyle style) {
  static const Glyph ph{true, 0.32, 0.32, 0.30, {{0.0, 0.0, 0.10}}};
  static const Glyph led{false, 0.30, 0.30, 0.28, {}};
  static const Glyph c1{false, 0.25, 0.25, 0.24, {{0.10, 0.0, 0.07}}};
  static const Glyph dsub{true, 0.60, 0.30, 0.30, {{-0.35, 0.0, 0.08}, {0.0, 0.0, 0.08}, {0.35, 0.0, 0.08}}};
  static const Glyph c2{false, 0.40, 0.40, 0.35, {{-0.18, 0.0, 0.08}, {0.18, 0.0, 0.08}}};
  switch (style) {
    case ComponentStyle::PH: return ph;
    case ComponentStyle::LED: return led;
    case ComponentStyle::C1: return c1;
    case ComponentStyle::DSUB: return dsub;
    case ComponentStyle::C2: return c2;
  }
  return ph;
}

double ramp(double inside_px) { return std::clamp(0.5 + inside_px / kEdgeWidthPx, 0.0, 1.0); }

class Canvas {
 public:
  Canvas(int r, double background)
      : r_(r), px_(static_cast<std::size_t>(r) * static_cast<std::size_t>(r), background) {}

  void disc(const Vec2& c, double radius, double intensity) {
    paint(c, radius, radius, intensity, [&](double dx, double dy) {
      return ramp(radius - std::hypot(dx, dy));
    });
  }

  void rect(const Vec2& c, double half_w, double half_h, double intensity) {
    paint(c, half_w, half_h, intensity, [&](double dx, double dy) {
      return ramp(half_w - std::abs(dx)) * ramp(half_h - std::abs(dy));
    });
  }

  std::vector<double>& pixels() { return px_; }

 private:
  template <typename Coverage>
  void paint(const Vec2& c, double half_w, double half_h, double intensity, Coverage coverage) {
    const double margin = kEdgeWidthPx;
    const int x0 = std::max(0, static_cast<int>(std::floor(c.x() - half_w - margin)));
    const int x1 = std::min(r_ - 1, static_cast<int>(std::ceil(c.x() + half_w + margin)));
    const int y0 = std::max(0, static_cast<int>(std::floor(c.y() - half_h - margin)));
    const int y1 = std::min(r_ - 1, static_cast<int>(std::ceil(c.y() + half_h + margin)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double a = coverage(x + 0.5 - c.x(), y + 0.5 - c.y());
        if (a <= 0.0) continue;
        double& p = px_[static_cast<std::size_t>(y) * static_cast<std::size_t>(r_) +
                        static_cast<std::size_t>(x)];
        p = p * (1.0 - a) + intensity * a;
      }
    }
  }

  int r_;
  std::vector<double> px_;
};

std::uint64_t bits_of(double v) {
  std::uint64_t b;
  static_assert(sizeof(b) == sizeof(v));
  std::memcpy(&b, &v, sizeof(v));
  return b;
}

}  // namespace

std::string_view to_string(ComponentStyle style) {
  switch (style) {
    case ComponentStyle::PH: return "PH";
    case ComponentStyle::LED: return "LED";
    case ComponentStyle::C1: return "C1";
    case ComponentStyle::DSUB: return "DSUB";
    case ComponentStyle::C2: return "C2";
  }
  return "PH";
}

ComponentStyle parse_style(std::string_view name) {
  for (const auto s : kAllStyles) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorKind::InvalidConfig, "unknown component style '" + std::string(name) + "'");
}

double TimingModel::k() const {
  return t_attempt * 2.0 * std::numbers::pi / (3.0 * std::numbers::sqrt3);
}

void TimingModel::validate() const {
  if (t_attempt < 0.0 || t_capture < 0.0 || t_infer < 0.0 || t_move < 0.0) {
    throw Error(ErrorKind::InvalidConfig, "timing constants must be >= 0");
  }
}

std::vector<CameraModel> default_cameras(const Vec3& hole, const Vec3& l) {
  const auto [a, b] = plane_basis(l);
  constexpr double kDistance = 150.0;
  constexpr double kFocal = 2400.0;
  constexpr int kResolution = 64;
  const double elevation = std::numbers::pi / 4.0;
  std::vector<CameraModel> cams;
  for (const double azimuth : {0.0, std::numbers::pi / 2.0}) {
    const Vec3 horizontal = std::cos(azimuth) * a + std::sin(azimuth) * b;
    const Vec3 dir = std::cos(elevation) * horizontal - std::sin(elevation) * l;
    cams.push_back(CameraModel::look_at(hole + kDistance * dir, hole, l, kFocal, kResolution));
  }
  return cams;
}

void WorldConfig::validate() const {
  if (!(tolerance > 0.0)) throw Error(ErrorKind::InvalidConfig, "tolerance must be > 0");
  if (hole_uncertainty_sigma < 0.0 || grasp_uncertainty_sigma < 0.0 || extra_error_radius < 0.0) {
    throw Error(ErrorKind::InvalidConfig, "uncertainties must be >= 0");
  }
  if (std::abs(insertion_direction.norm() - 1.0) > 1e-9) {
    throw Error(ErrorKind::InvalidConfig, "insertion_direction must be a unit vector");
  }
  if (cameras.size() < 2) throw Error(ErrorKind::InvalidConfig, "at least 2 cameras are required");
  for (const auto& cam : cameras) {
    cam.validate();
    const Vec3 view = nominal_hole - cam.position;
    if (cam.orientation.row(2).dot(view) <= 0.0) {
      throw Error(ErrorKind::InvalidConfig, "camera optical axis must face the insertion");
    }
  }
  if (hover_height < 0.0 || camera_angle_error_deg < 0.0) {
    throw Error(ErrorKind::InvalidConfig, "hover_height and camera_angle_error_deg must be >= 0");
  }
}

Vec3 WorldState::hover_tcp() const { return nominal_hole - config.hover_height * l(); }

Vec3 WorldState::start_tcp() const { return hover_tcp() + from_plane(extra_error); }

double WorldState::height_of(const Vec3& p) const { return -(p - nominal_hole).dot(l()); }

WorldState new_world(const WorldConfig& config) {
  config.validate();
  WorldState w;
  w.config = config;
  w.rng.seed(config.seed);
  std::tie(w.plane_a, w.plane_b) = plane_basis(config.insertion_direction);
  w.nominal_hole = config.nominal_hole;

  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double hx = normal(w.rng);
  const double hy = normal(w.rng);
  w.true_hole = w.nominal_hole + w.from_plane(config.hole_uncertainty_sigma * Vec2(hx, hy));
  const double gx = normal(w.rng);
  const double gy = normal(w.rng);
  w.grasp_offset = config.grasp_uncertainty_sigma * Vec2(gx, gy);
  const double radius = config.extra_error_radius * std::sqrt(uniform(w.rng));
  const double theta = 2.0 * std::numbers::pi * uniform(w.rng);
  w.extra_error = radius * Vec2(std::cos(theta), std::sin(theta));

  for (const auto& cam : config.cameras) {
    if (config.camera_angle_error_deg > 0.0) {
      Vec3 axis;
      for (int i = 0; i < 3; ++i) axis(i) = normal(w.rng);
      axis.normalize();
      const double angle = uniform(w.rng) * config.camera_angle_error_deg * std::numbers::pi / 180.0;
      const Vec3 pos = w.nominal_hole + Eigen::AngleAxisd(angle, axis) * (cam.position - w.nominal_hole);
      w.true_cameras.push_back(CameraModel::look_at(pos, w.nominal_hole, config.insertion_direction,
                                                    cam.focal_length, cam.resolution));
    } else {
      w.true_cameras.push_back(cam);
    }
  }

  w.appearance.background = 0.4 + 0.2 * uniform(w.rng);
  w.appearance.peg_scale = 0.97 + 0.06 * uniform(w.rng);
  w.appearance.hole_scale = 0.97 + 0.06 * uniform(w.rng);

  w.tcp = w.start_tcp();
  w.trajectory.push_back(w.tcp);
  return w;
}

void move_tcp(WorldState& world, const Vec3& target) {
  const double along = (target - world.tcp).dot(world.l());
  if (std::abs(along) > kPlaneTol) {
    throw Error(ErrorKind::OutOfPlaneMotion,
                "TCP displacement has a component of " + std::to_string(along) +
                    " mm along the insertion direction");
  }
  world.tcp = target;
  world.trajectory.push_back(target);
}

Vec3 peg_center(const WorldState& world, const Vec3& tcp) {
  return tcp + world.from_plane(world.grasp_offset);
}

Vec3 in_plane_error(const WorldState& world, const Vec3& tcp) {
  return in_plane(world.true_hole - peg_center(world, tcp), world.l());
}

bool attempt_insertion(WorldState& world, const Vec3& tcp) {
  ++world.attempts;
  return in_plane_error(world, tcp).norm() <= world.config.tolerance;
}

double true_label(const WorldState& world, int camera_index, const Vec3& tcp) {
  const auto& cam = world.true_cameras.at(static_cast<std::size_t>(camera_index));
  const Vec3 u = cam.orientation.row(0).transpose();
  return normalize_error(scalar_error(in_plane_error(world, tcp), u), cam);
}

Observation render(const WorldState& world, int camera_index, const Vec3& tcp) {
  if (camera_index < 0 || static_cast<std::size_t>(camera_index) >= world.true_cameras.size()) {
    throw Error(ErrorKind::InvalidConfig, "camera index out of range");
  }
  const auto& cam = world.true_cameras[static_cast<std::size_t>(camera_index)];
  const Glyph& glyph = glyph_for(world.config.component_style);
  const double background = world.appearance.background;

  Canvas canvas(cam.resolution, background);

  const Vec2 hole_px = project(cam, world.true_hole);
  const double hole_scale = cam.focal_length / to_camera_frame(cam, world.true_hole).z();
  canvas.disc(hole_px, glyph.hole_radius * world.appearance.hole_scale * hole_scale, kHoleIntensity);

  const Vec3 peg = peg_center(world, tcp);
  const Vec2 peg_px = project(cam, peg);
  const double peg_scale =
      world.appearance.peg_scale * cam.focal_length / to_camera_frame(cam, peg).z();
  const double peg_intensity = world.config.peg_matches_background ? background : kPegIntensity;
  const double pin_intensity = world.config.peg_matches_background ? background : kPinIntensity;
  if (glyph.rectangular) {
    canvas.rect(peg_px, glyph.half_w * peg_scale, glyph.half_h * peg_scale, peg_intensity);
  } else {
    canvas.disc(peg_px, glyph.half_w * peg_scale, peg_intensity);
  }
  for (const auto& pin : glyph.pins) {
    canvas.disc(peg_px + peg_scale * Vec2(pin.x, pin.y), pin.radius * peg_scale, pin_intensity);
  }

  std::uint64_t key = world.config.seed;
  key = hash_combine(key, bits_of(tcp.x()));
  key = hash_combine(key, bits_of(tcp.y()));
  key = hash_combine(key, bits_of(tcp.z()));
  key = hash_combine(key, static_cast<std::uint64_t>(camera_index));
  std::mt19937_64 noise_rng(key);
  std::normal_distribution<double> noise(0.0, kPixelNoise);

  Observation obs;
  obs.resolution = cam.resolution;
  obs.camera_index = camera_index;
  obs.pixels.reserve(canvas.pixels().size());
  for (const double p : canvas.pixels()) {
    obs.pixels.push_back(static_cast<float>(std::clamp(p + noise(noise_rng), 0.0, 1.0)));
  }
  obs.truth_y = true_label(world, camera_index, tcp);
  return obs;
}

InsertionOutcome spiral_insert(WorldState& world, const Vec3& start_tcp,
                               const SearchPattern& pattern, const TimingModel& timing) {
  InsertionOutcome out;
  out.pattern_tolerance_mismatch = std::abs(pattern.tolerance - world.config.tolerance) > 1e-12;
  out.true_initial_error = in_plane_error(world, start_tcp).norm();
  out.post_servo_retrospective_error = std::numeric_limits<double>::quiet_NaN();
  out.final_tcp = world.tcp;
  for (const auto& offset : pattern.offsets) {
    const Vec3 target = start_tcp + world.from_plane(offset);
    if (target != world.tcp) move_tcp(world, target);
    ++out.attempts;
    if (attempt_insertion(world, target)) {
      out.success = true;
      out.retrospective_error = offset.norm();
      break;
    }
  }
  out.final_tcp = world.tcp;
  out.simulated_time = out.attempts * timing.t_attempt;
  world.elapsed += out.simulated_time;
  return out;
}

std::string to_pgm(const Observation& obs) {
  std::string out = "P5\n" + std::to_string(obs.resolution) + " " +
                    std::to_string(obs.resolution) + "\n255\n";
  out.reserve(out.size() + obs.pixels.size());
  for (const float p : obs.pixels) {
    out.push_back(static_cast<char>(static_cast<unsigned char>(
        std::lround(std::clamp(static_cast<double>(p), 0.0, 1.0) * 255.0))));
  }
  return out;
}

}  // namespace ipvs
