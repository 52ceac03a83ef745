#include "ipvs/search.hpp"

#include "ipvs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace ipvs {

namespace {

struct LatticePoint {
  std::int64_t norm_key;  // i^2 + ij + j^2, exact squared norm in units of s^2
  double angle;           // [0, 2 pi)
  Vec2 offset;
};

}  // namespace

SearchPattern generate_pattern(double tolerance, double max_radius) {
  if (!(tolerance > 0.0)) throw Error(ErrorKind::InvalidTolerance, "tolerance must be > 0");
  if (!(max_radius >= 0.0)) throw Error(ErrorKind::InvalidRadius, "max_radius must be >= 0");

  SearchPattern pattern;
  pattern.tolerance = tolerance;
  pattern.max_radius = max_radius;
  pattern.spacing = tolerance * std::numbers::sqrt3;

  const double s = pattern.spacing;
  const double bound = max_radius + tolerance;
  const auto extent = static_cast<std::int64_t>(std::ceil(2.0 * bound / s)) + 1;

  std::vector<LatticePoint> points;
  for (std::int64_t j = -extent; j <= extent; ++j) {
    for (std::int64_t i = -extent; i <= extent; ++i) {
      const std::int64_t key = i * i + i * j + j * j;
      const double norm = s * std::sqrt(static_cast<double>(key));
      if (norm > bound * (1.0 + 1e-12)) continue;
      const Vec2 p(s * (static_cast<double>(i) + 0.5 * static_cast<double>(j)),
                   s * 0.5 * std::numbers::sqrt3 * static_cast<double>(j));
      double angle = key == 0 ? 0.0 : std::atan2(p.y(), p.x());
      if (angle < 0.0) angle += 2.0 * std::numbers::pi;
      points.push_back({key, angle, p});
    }
  }
  std::sort(points.begin(), points.end(), [](const LatticePoint& a, const LatticePoint& b) {
    if (a.norm_key != b.norm_key) return a.norm_key < b.norm_key;
    return a.angle < b.angle;
  });

  pattern.offsets.reserve(points.size());
  for (const auto& p : points) pattern.offsets.push_back(p.offset);
  return pattern;
}

double covering_radius(std::span<const Vec2> offsets, double region_radius, double grid_step) {
  if (!(grid_step > 0.0)) throw Error(ErrorKind::InvalidConfig, "grid_step must be > 0");
  if (offsets.empty()) return std::numeric_limits<double>::infinity();

  // Bucket the offsets so each query only inspects nearby cells.
  Vec2 lo = offsets.front();
  Vec2 hi = offsets.front();
  for (const auto& p : offsets) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double extent = (hi - lo).maxCoeff();
  const double cell = std::max({std::sqrt((hi - lo).prod() / static_cast<double>(offsets.size())),
                                extent / 1024.0, 1e-9});
  const auto nx = static_cast<long>(std::floor((hi.x() - lo.x()) / cell)) + 1;
  const auto ny = static_cast<long>(std::floor((hi.y() - lo.y()) / cell)) + 1;
  std::vector<std::vector<Vec2>> buckets(static_cast<std::size_t>(nx * ny));
  auto cell_of = [&](const Vec2& p) {
    const long cx = std::clamp(static_cast<long>(std::floor((p.x() - lo.x()) / cell)), 0L, nx - 1);
    const long cy = std::clamp(static_cast<long>(std::floor((p.y() - lo.y()) / cell)), 0L, ny - 1);
    return std::pair{cx, cy};
  };
  for (const auto& p : offsets) {
    const auto [cx, cy] = cell_of(p);
    buckets[static_cast<std::size_t>(cy * nx + cx)].push_back(p);
  }

  auto nearest = [&](const Vec2& q) {
    const auto [qx, qy] = cell_of(q);
    double best = std::numeric_limits<double>::infinity();
    const long max_ring = std::max(nx, ny);
    for (long ring = 0; ring <= max_ring; ++ring) {
      for (long cy = qy - ring; cy <= qy + ring; ++cy) {
        if (cy < 0 || cy >= ny) continue;
        const bool edge_row = cy == qy - ring || cy == qy + ring;
        for (long cx = qx - ring; cx <= qx + ring; cx += (edge_row ? 1 : 2 * ring)) {
          if (cx >= 0 && cx < nx) {
            for (const auto& p : buckets[static_cast<std::size_t>(cy * nx + cx)]) {
              best = std::min(best, (p - q).norm());
            }
          }
          if (ring == 0) break;
        }
      }
      // Unvisited cells are at least ring * cell away, also for clamped queries.
      if (best <= static_cast<double>(ring) * cell) break;
    }
    return best;
  };

  const auto steps = static_cast<long>(std::floor(2.0 * region_radius / grid_step + 1e-9));
  double worst = 0.0;
  for (long iy = 0; iy <= steps; ++iy) {
    const double y = -region_radius + static_cast<double>(iy) * grid_step;
    for (long ix = 0; ix <= steps; ++ix) {
      const double x = -region_radius + static_cast<double>(ix) * grid_step;
      if (x * x + y * y > region_radius * region_radius * (1.0 + 1e-12)) continue;
      worst = std::max(worst, nearest(Vec2(x, y)));
    }
  }
  return worst;
}

}  // namespace ipvs
