#pragma once

#include <cstdint>
#include <vector>

#include "bevguard/core/grid.hpp"
#include "bevguard/scene/types.hpp"

namespace bevguard::attack {

/// Supersampled BEV occupancy: each cell holds the fraction of its sample points covered by
/// at least one box. Supports incremental add/remove.
class OccupancyRaster {
 public:
  OccupancyRaster(GridSpec grid, int samples_per_axis);

  /// Adds (+1) or removes (-1) a box; returns the indices of cells whose occupancy may change.
  std::vector<std::size_t> update(const Corners& box, int sign);
  void add(const scene::DetectionSet& set);

  double occupancy(std::size_t cell) const { return occupancy_[cell]; }
  const std::vector<double>& occupancy() const { return occupancy_; }
  const GridSpec& grid() const { return grid_; }

 private:
  GridSpec grid_;
  int s_;
  std::vector<std::uint16_t> counts_;
  std::vector<double> occupancy_;
};

std::vector<double> occupancy_grid(const scene::DetectionSet& set, const GridSpec& grid, int samples_per_axis);

}  // namespace bevguard::attack
