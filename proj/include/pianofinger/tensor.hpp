#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "pianofinger/errors.hpp"

namespace pianofinger {

// Dense row-major tensor. Rank 1 and 2 are all the model needs.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.data.assign(t.count(), T(0));
    return t;
  }

  static Tensor vector_of(std::vector<T> values) {
    Tensor t;
    t.shape = {static_cast<int>(values.size())};
    t.data = std::move(values);
    return t;
  }

  std::size_t count() const {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
  }

  std::size_t size() const { return data.size(); }
  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  T& at2(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
  const T& at2(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

  const T* row_ptr(int r) const { return data.data() + static_cast<std::size_t>(r) * cols(); }
  T* row_ptr(int r) { return data.data() + static_cast<std::size_t>(r) * cols(); }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  void add_scaled(const Tensor& other, T scale) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += scale * other.data[i];
  }
};

template <typename T>
inline void check_finite(const T* values, std::size_t n, const char* where) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(static_cast<double>(values[i]))) {
      throw NumericError(std::string("non-finite value in ") + where);
    }
  }
}

template <typename T>
inline void check_finite(const Tensor<T>& t, const char* where) {
  check_finite(t.data.data(), t.data.size(), where);
}

}  // namespace pianofinger
