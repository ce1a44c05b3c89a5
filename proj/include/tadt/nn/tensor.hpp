#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tadt::nn {

/// Dense row-major 2-D array. Vectors are 1 x n, scalars 1 x 1.
template <typename Real>
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Real> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, Real fill = Real(0)) : rows(r), cols(c), data(r * c, fill) {}
  Tensor(std::size_t r, std::size_t c, std::vector<Real> values) : rows(r), cols(c), data(std::move(values)) {}

  Real& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::size_t size() const { return data.size(); }
  std::span<Real> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const Real> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  void fill(Real v) { std::fill(data.begin(), data.end(), v); }
  std::string shape_string() const { return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]"; }

  bool operator==(const Tensor&) const = default;
};

/// A learnable array with its gradient accumulator.
template <typename Real>
struct Parameter {
  std::string name;
  Tensor<Real> value;
  Tensor<Real> grad;

  Parameter(std::string n, Tensor<Real> v) : name(std::move(n)), value(std::move(v)), grad(value.rows, value.cols) {}
  void zero_grad() { grad.fill(Real(0)); }
};

}  // namespace tadt::nn
