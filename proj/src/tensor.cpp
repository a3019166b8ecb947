// SPDX-License-Identifier: Apache-2.0
#include "dam/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dam/error.hpp"

namespace dam {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

DenseArray::DenseArray(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0f) {
  for (auto d : shape_) {
    if (d == 0) throw DimensionError("DenseArray: zero-sized dimension in " + shape_string(shape_));
  }
}

DenseArray::DenseArray(std::vector<std::size_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) {
    if (d == 0) throw DimensionError("DenseArray: zero-sized dimension in " + shape_string(shape_));
  }
  if (shape_product(shape_) != data_.size()) {
    throw DimensionError("DenseArray: shape " + shape_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
  }
}

DenseArray DenseArray::zeros(std::vector<std::size_t> shape) { return DenseArray(std::move(shape)); }

DenseArray DenseArray::filled(std::vector<std::size_t> shape, float value) {
  DenseArray a(std::move(shape));
  std::fill(a.data_.begin(), a.data_.end(), value);
  return a;
}

DenseArray DenseArray::vector(std::vector<float> values) {
  const std::size_t n = values.size();
  return DenseArray({n}, std::move(values));
}

DenseArray DenseArray::matrix(std::size_t rows, std::size_t cols, std::vector<float> values) {
  return DenseArray({rows, cols}, std::move(values));
}

DenseArray DenseArray::matrix(std::initializer_list<std::initializer_list<float>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<float> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("DenseArray::matrix: ragged rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return DenseArray({r, c}, std::move(values));
}

DenseArray DenseArray::scalar(float value) { return DenseArray({1}, {value}); }

std::size_t DenseArray::rows() const {
  if (rank() != 2) throw DimensionError("rows(): expected rank-2 array, got " + shape_string(shape_));
  return shape_[0];
}

std::size_t DenseArray::cols() const {
  if (rank() != 2) throw DimensionError("cols(): expected rank-2 array, got " + shape_string(shape_));
  return shape_[1];
}

DenseArray DenseArray::reshaped(std::vector<std::size_t> shape) const { return DenseArray(std::move(shape), data_); }

DenseArray DenseArray::row(std::size_t r) const {
  const std::size_t c = cols();
  if (r >= rows()) throw DimensionError("row(): index out of range");
  return DenseArray({c}, std::vector<float>(data_.begin() + r * c, data_.begin() + (r + 1) * c));
}

bool DenseArray::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

DenseArray stack_rows(std::span<const DenseArray> rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no rows");
  const std::size_t len = rows.front().size();
  std::vector<float> values;
  values.reserve(rows.size() * len);
  for (const auto& r : rows) {
    if (r.rank() != 1 || r.size() != len) throw DimensionError("stack_rows: rows must be rank-1 of equal length");
    values.insert(values.end(), r.values().begin(), r.values().end());
  }
  return DenseArray({rows.size(), len}, std::move(values));
}

DenseArray matmul(const DenseArray& a, const DenseArray& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw DimensionError("matmul: cannot multiply " + shape_string(a.shape()) + " by " + shape_string(b.shape()));
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  DenseArray out({n, m});
  auto o = out.data();
  auto av = a.data();
  auto bv = b.data();
  // i-k-j order keeps the inner loop contiguous; summation order per output
  // element is fixed, so results are deterministic.
  for (std::size_t i = 0; i < n; ++i) {
    float* orow = o.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const float aip = av[i * k + p];
      if (aip == 0.0f) continue;
      const float* brow = bv.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
    }
  }
  return out;
}

DenseArray transpose(const DenseArray& a) {
  const std::size_t n = a.rows(), m = a.cols();
  DenseArray out({m, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

namespace {
void require_same_shape(const DenseArray& a, const DenseArray& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}
}  // namespace

DenseArray add(const DenseArray& a, const DenseArray& b) {
  require_same_shape(a, b, "add");
  DenseArray out = a;
  auto o = out.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return out;
}

DenseArray subtract(const DenseArray& a, const DenseArray& b) {
  require_same_shape(a, b, "subtract");
  DenseArray out = a;
  auto o = out.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return out;
}

DenseArray hadamard(const DenseArray& a, const DenseArray& b) {
  require_same_shape(a, b, "hadamard");
  DenseArray out = a;
  auto o = out.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return out;
}

DenseArray scale(const DenseArray& a, float s) {
  DenseArray out = a;
  for (auto& v : out.data()) v *= s;
  return out;
}

DenseArray add_row_bias(const DenseArray& x, const DenseArray& bias) {
  if (x.rank() != 2 || bias.rank() != 1 || bias.size() != x.cols()) {
    throw DimensionError("add_row_bias: " + shape_string(x.shape()) + " with bias " + shape_string(bias.shape()));
  }
  DenseArray out = x;
  const std::size_t n = x.rows(), m = x.cols();
  auto o = out.data();
  auto bv = bias.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) o[i * m + j] += bv[j];
  return out;
}

DenseArray sum_rows(const DenseArray& x) {
  const std::size_t n = x.rows(), m = x.cols();
  std::vector<double> acc(m, 0.0);
  auto xv = x.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) acc[j] += xv[i * m + j];
  std::vector<float> out(acc.begin(), acc.end());
  return DenseArray({m}, std::move(out));
}

namespace {
constexpr float kSqrt2OverPi = 0.7978845608028654f;
constexpr float kGeluCubic = 0.044715f;
}  // namespace

float gelu(float x) {
  const float inner = kSqrt2OverPi * (x + kGeluCubic * x * x * x);
  return 0.5f * x * (1.0f + std::tanh(inner));
}

float gelu_derivative(float x) {
  const float inner = kSqrt2OverPi * (x + kGeluCubic * x * x * x);
  const float t = std::tanh(inner);
  const float dinner = kSqrt2OverPi * (1.0f + 3.0f * kGeluCubic * x * x);
  return 0.5f * (1.0f + t) + 0.5f * x * (1.0f - t * t) * dinner;
}

DenseArray gelu(const DenseArray& x) {
  DenseArray out = x;
  for (auto& v : out.data()) v = gelu(v);
  return out;
}

double sum(const DenseArray& a) {
  double s = 0.0;
  for (float v : a.data()) s += v;
  return s;
}

double dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

double norm(std::span<const float> a) { return std::sqrt(dot(a, a)); }

float max_abs_diff(const DenseArray& a, const DenseArray& b) {
  require_same_shape(a, b, "max_abs_diff");
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (auto b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t checksum(const DenseArray& a) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto d : a.shape()) {
    const std::uint64_t v = d;
    h = fnv1a(std::as_bytes(std::span(&v, 1)), h);
  }
  return fnv1a(std::as_bytes(a.data()), h);
}

}  // namespace dam
