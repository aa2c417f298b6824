#pragma once

#include <cstddef>
#include <vector>

#include "bevguard/core/geometry.hpp"

namespace bevguard {

/// BEV raster layout. Cell (row, col) spans x in [col, col+1), y in [row, row+1) grid units.
struct GridSpec {
  int rows = 64;
  int cols = 64;
  double resolution = 1.0;  // meters per cell

  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  bool contains(int row, int col) const { return row >= 0 && row < rows && col >= 0 && col < cols; }
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(col);
  }
  Vec2 cell_center(int row, int col) const { return {col + 0.5, row + 0.5}; }
  double diagonal() const;
  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(Cell, Cell) = default;
};

/// Cell containing a grid-coordinate point, clamped to the grid.
Cell cell_of(const GridSpec& g, Vec2 p);

template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(GridSpec spec, T fill) : spec_(spec), cells_(spec.size(), fill) {}

  const GridSpec& spec() const { return spec_; }
  T& at(int row, int col) { return cells_[spec_.index(row, col)]; }
  const T& at(int row, int col) const { return cells_[spec_.index(row, col)]; }
  T& operator[](std::size_t i) { return cells_[i]; }
  const T& operator[](std::size_t i) const { return cells_[i]; }
  std::size_t size() const { return cells_.size(); }
  std::vector<T>& data() { return cells_; }
  const std::vector<T>& data() const { return cells_; }

 private:
  GridSpec spec_{};
  std::vector<T> cells_;
};

}  // namespace bevguard
