#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace divsample {

/// Plain row-major matrix for data-level code (pose sequences, DCT
/// coefficients, metric inputs). Networks work on Tensor instead.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

/// A pose sequence is [J*C, frames]: one row per joint coordinate, one column
/// per frame.
using PoseSequence = Matrix;

}  // namespace divsample
