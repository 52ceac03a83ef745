#pragma once

// Spiral-like insertion search on an isometric (triangular) lattice.
//
// Lattice points are visited in order of increasing distance from the start,
// so the search expands outwards ring by ring. With spacing s = eps * sqrt(3)
// the largest empty circle between lattice points has radius s / sqrt(3) = eps,
// so any hole within the search radius is hit by some attempt whose in-plane
// error is at most eps.

#include "ipvs/geometry.hpp"

#include <span>
#include <vector>

namespace ipvs {

struct SearchPattern {
  std::vector<Vec2> offsets;  // mm, offsets[0] == (0, 0)
  double spacing = 0.0;
  double tolerance = 0.0;
  double max_radius = 0.0;
};

// Throws InvalidTolerance (eps <= 0) or InvalidRadius (max_radius < 0).
SearchPattern generate_pattern(double tolerance, double max_radius);

// Largest distance from any point of a dense square grid (restricted to the
// disc of `region_radius`) to its nearest offset. Brute force over a bucket grid,
// independent of the lattice structure.
double covering_radius(std::span<const Vec2> offsets, double region_radius, double grid_step);

inline double covering_radius(const SearchPattern& pattern, double region_radius,
                              double grid_step) {
  return covering_radius(pattern.offsets, region_radius, grid_step);
}

}  // namespace ipvs
