#pragma once

#include <cstdint>
#include <vector>

#include "bartm/common.hpp"

namespace bartm {

// Row-major dense storage. Container only; no algebra lives here.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    require(rows >= 0 && cols >= 0, "Grid: negative dimensions");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  T& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  const T& operator()(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * cols_ + j];
  }

  const T* row_ptr(int i) const { return data_.data() + static_cast<std::size_t>(i) * cols_; }
  T* row_ptr(int i) { return data_.data() + static_cast<std::size_t>(i) * cols_; }

  const std::vector<T>& storage() const { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using Matrix = Grid<double>;
using BoolGrid = Grid<std::uint8_t>;

}  // namespace bartm
