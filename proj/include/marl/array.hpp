#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace marl {

// Dense row-major 2-D array of doubles. Vectors are just 1xN or Nx1. All
// training math is done in 64-bit floats.
struct Array {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Array() = default;
  Array(int r, int c) : rows(r), cols(c), data(size_t(r) * size_t(c), 0.0) {
    if (r < 0 || c < 0) throw std::invalid_argument("Array: negative shape");
  }
  Array(int r, int c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
    if (data.size() != size_t(r) * size_t(c))
      throw std::invalid_argument("Array: data size does not match shape");
  }

  static Array full(int r, int c, double v) {
    Array a(r, c);
    for (auto& x : a.data) x = v;
    return a;
  }
  static Array scalar(double v) { return full(1, 1, v); }

  size_t size() const { return data.size(); }
  double& at(int r, int c) { return data[size_t(r) * cols + c]; }
  double at(int r, int c) const { return data[size_t(r) * cols + c]; }
  double* row(int r) { return data.data() + size_t(r) * cols; }
  const double* row(int r) const { return data.data() + size_t(r) * cols; }

  bool same_shape(const Array& o) const { return rows == o.rows && cols == o.cols; }
  bool is_scalar() const { return rows == 1 && cols == 1; }

  std::string shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
  }
};

inline void require_same_shape(const Array& a, const Array& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() +
                                " vs " + b.shape_str());
}

}  // namespace marl
