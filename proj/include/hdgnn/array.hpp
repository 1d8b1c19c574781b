#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace hdgnn::ad {

// Dense row-major array of doubles, rank 0 (scalar), 1, or 2.
struct Array {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Array() = default;

  static Array scalar(double v) {
    Array a;
    a.data.assign(1, v);
    return a;
  }

  static Array zeros_like(const Array& other) {
    Array a;
    a.shape = other.shape;
    a.data.assign(other.data.size(), 0.0);
    return a;
  }

  static Array zeros(std::initializer_list<std::size_t> dims) {
    Array a;
    a.shape.assign(dims);
    std::size_t n = 1;
    for (std::size_t d : a.shape) n *= d;
    a.data.assign(n, 0.0);
    return a;
  }

  static Array vec(std::initializer_list<double> vals) {
    Array a;
    a.shape = {vals.size()};
    a.data.assign(vals);
    return a;
  }

  static Array vec(std::vector<double> vals) {
    Array a;
    a.shape = {vals.size()};
    a.data = std::move(vals);
    return a;
  }

  static Array matrix(std::size_t rows, std::size_t cols) {
    Array a;
    a.shape = {rows, cols};
    a.data.assign(rows * cols, 0.0);
    return a;
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  bool is_scalar() const { return data.size() == 1 && shape.empty(); }

  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }

  double& operator()(std::size_t i) { return data[i]; }
  double operator()(std::size_t i) const { return data[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

  bool same_shape(const Array& o) const { return shape == o.shape; }
};

}  // namespace hdgnn::ad
