#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "bwn/errors.hpp"

namespace bwn {

inline std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

inline std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense row-major n-dimensional array. The sole numeric carrier of the
/// engine; shape metadata plus a flat value buffer.
template <std::floating_point T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s, T fill = T(0))
      : shape(std::move(s)), data(shape_product(shape), fill) {}

  static Tensor from(std::vector<std::size_t> s, std::vector<T> values) {
    if (shape_product(s) != values.size())
      throw config_error("tensor data length " + std::to_string(values.size()) +
                         " does not match shape " + shape_to_string(s));
    Tensor t;
    t.shape = std::move(s);
    t.data = std::move(values);
    return t;
  }

  std::size_t size() const noexcept { return data.size(); }
  std::size_t rank() const noexcept { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  T* ptr() noexcept { return data.data(); }
  const T* ptr() const noexcept { return data.data(); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  // rank-2 access
  T& at2(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  const T& at2(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

  // rank-4 access
  T& at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }
  const T& at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  bool operator==(const Tensor& other) const {
    return shape == other.shape && data == other.data;
  }

  template <std::floating_point U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace bwn
