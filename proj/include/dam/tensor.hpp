// SPDX-License-Identifier: Apache-2.0
//
// Dense float32 arrays and the handful of kernels the backbone and adapters
// need. Everything is row-major; 2-D arrays are [rows x cols].
#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace dam {

class DenseArray {
 public:
  DenseArray() = default;
  explicit DenseArray(std::vector<std::size_t> shape);
  DenseArray(std::vector<std::size_t> shape, std::vector<float> data);

  static DenseArray zeros(std::vector<std::size_t> shape);
  static DenseArray filled(std::vector<std::size_t> shape, float value);
  static DenseArray vector(std::vector<float> values);
  static DenseArray matrix(std::size_t rows, std::size_t cols, std::vector<float> values);
  static DenseArray matrix(std::initializer_list<std::initializer_list<float>> rows);
  static DenseArray scalar(float value);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  // Only valid for rank-2 arrays.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  const std::vector<float>& values() const noexcept { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }
  float& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  float at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  // Same elements, different shape; product must match.
  DenseArray reshaped(std::vector<std::size_t> shape) const;
  // Row `r` of a rank-2 array as a rank-1 array.
  DenseArray row(std::size_t r) const;

  bool all_finite() const noexcept;

  friend bool operator==(const DenseArray& a, const DenseArray& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<float> data_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);
std::string shape_string(const std::vector<std::size_t>& shape);

// Stack rank-1 arrays of equal length into a [n x len] matrix.
DenseArray stack_rows(std::span<const DenseArray> rows);

DenseArray matmul(const DenseArray& a, const DenseArray& b);
DenseArray transpose(const DenseArray& a);
DenseArray add(const DenseArray& a, const DenseArray& b);
DenseArray subtract(const DenseArray& a, const DenseArray& b);
DenseArray hadamard(const DenseArray& a, const DenseArray& b);
DenseArray scale(const DenseArray& a, float s);
// x [n x m] + bias [m] broadcast over rows.
DenseArray add_row_bias(const DenseArray& x, const DenseArray& bias);
// Column sums of [n x m] -> [m].
DenseArray sum_rows(const DenseArray& x);

// tanh-approximated GELU and its derivative.
float gelu(float x);
float gelu_derivative(float x);
DenseArray gelu(const DenseArray& x);

// Reductions accumulate in double.
double sum(const DenseArray& a);
double dot(std::span<const float> a, std::span<const float> b);
double norm(std::span<const float> a);
float max_abs_diff(const DenseArray& a, const DenseArray& b);

// FNV-1a over shape and raw bytes; used for freeze checks.
std::uint64_t checksum(const DenseArray& a);
std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace dam
