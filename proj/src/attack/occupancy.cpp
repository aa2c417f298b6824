#include "bevguard/attack/occupancy.hpp"

#include <algorithm>
#include <cmath>

#include "bevguard/core/error.hpp"

namespace bevguard::attack {

OccupancyRaster::OccupancyRaster(GridSpec grid, int samples_per_axis)
    : grid_(grid), s_(samples_per_axis), occupancy_(grid.size(), 0.0) {
  if (samples_per_axis < 1) throw ConfigError("OccupancyRaster: samples_per_axis must be >= 1");
  counts_.assign(grid.size() * static_cast<std::size_t>(s_ * s_), 0);
}

std::vector<std::size_t> OccupancyRaster::update(const Corners& box, int sign) {
  double x0 = box[0], x1 = x0, y0 = box[1], y1 = y0;
  for (int k = 1; k < 4; ++k) {
    x0 = std::min(x0, box[2 * k]), x1 = std::max(x1, box[2 * k]);
    y0 = std::min(y0, box[2 * k + 1]), y1 = std::max(y1, box[2 * k + 1]);
  }
  std::vector<std::size_t> touched;
  const int c0 = std::max(0, static_cast<int>(std::floor(x0)));
  const int c1 = std::min(grid_.cols - 1, static_cast<int>(std::floor(x1)));
  const int r0 = std::max(0, static_cast<int>(std::floor(y0)));
  const int r1 = std::min(grid_.rows - 1, static_cast<int>(std::floor(y1)));
  const std::size_t per_cell = static_cast<std::size_t>(s_ * s_);
  const double inv = 1.0 / s_;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const std::size_t cell = grid_.index(r, c);
      bool hit = false;
      for (int j = 0; j < s_; ++j) {
        for (int i = 0; i < s_; ++i) {
          const Vec2 p{c + (i + 0.5) * inv, r + (j + 0.5) * inv};
          if (!point_in_quad(box, p)) continue;
          auto& n = counts_[cell * per_cell + static_cast<std::size_t>(j * s_ + i)];
          if (sign > 0) {
            ++n;
          } else if (n > 0) {
            --n;
          }
          hit = true;
        }
      }
      if (!hit) continue;
      std::size_t filled = 0;
      for (std::size_t k = 0; k < per_cell; ++k) filled += counts_[cell * per_cell + k] > 0;
      occupancy_[cell] = static_cast<double>(filled) / static_cast<double>(per_cell);
      touched.push_back(cell);
    }
  }
  return touched;
}

void OccupancyRaster::add(const scene::DetectionSet& set) {
  for (const auto& b : set.boxes) update(b.corners, +1);
}

std::vector<double> occupancy_grid(const scene::DetectionSet& set, const GridSpec& grid, int samples_per_axis) {
  OccupancyRaster r(grid, samples_per_axis);
  r.add(set);
  return r.occupancy();
}

}  // namespace bevguard::attack
