// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <limits>
#include <random>

#include "dam/error.hpp"
#include "dam/parameter_bundle.hpp"
#include "dam/tensor.hpp"
#include "support.hpp"

using namespace dam;

TEST_CASE("matmul by the identity returns the operand") {
  const auto eye = DenseArray::matrix({{1, 0}, {0, 1}});
  const auto m = DenseArray::matrix({{1, 2}, {3, 4}});
  CHECK(matmul(eye, m) == m);
}

TEST_CASE("matmul by a projector keeps one coordinate") {
  const auto p = DenseArray::matrix({{1, 0}, {0, 0}});
  const auto v = DenseArray::matrix({{5}, {7}});
  CHECK(matmul(p, v) == DenseArray::matrix({{5}, {0}}));
}

TEST_CASE("matmul agrees with a triple loop") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = testing::random_array(rng, {3, 4});
    const auto b = testing::random_array(rng, {4, 2});
    const auto c = matmul(a, b);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < 4; ++k) s += static_cast<double>(a.at(i, k)) * b.at(k, j);
        CHECK(std::abs(c.at(i, j) - s) < 1e-6);
      }
  }
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  CHECK_THROWS_AS(matmul(DenseArray::zeros({2, 3}), DenseArray::zeros({2, 3})), DimensionError);
}

TEST_CASE("shape must match the data length") {
  CHECK_THROWS_AS(DenseArray({2, 2}, std::vector<float>{1, 2, 3}), DimensionError);
  CHECK(shape_product({2, 3, 4}) == 24);
}

TEST_CASE("kernels are deterministic") {
  std::mt19937_64 rng(5);
  const auto a = testing::random_array(rng, {5, 7});
  const auto b = testing::random_array(rng, {7, 3});
  CHECK(matmul(a, b) == matmul(a, b));
  CHECK(gelu(a) == gelu(a));
  CHECK(checksum(a) == checksum(a));
}

TEST_CASE("elementwise helpers") {
  const auto a = DenseArray::matrix({{1, -2}, {3, 4}});
  CHECK(add(a, a) == scale(a, 2.0f));
  CHECK(subtract(a, a) == DenseArray::zeros({2, 2}));
  CHECK(hadamard(a, a) == DenseArray::matrix({{1, 4}, {9, 16}}));
  CHECK(transpose(a) == DenseArray::matrix({{1, 3}, {-2, 4}}));
  CHECK(add_row_bias(a, DenseArray::vector({1, 1})) == DenseArray::matrix({{2, -1}, {4, 5}}));
  CHECK(sum_rows(a) == DenseArray::vector({4, 2}));
  CHECK(sum(a) == doctest::Approx(6.0));
  CHECK(gelu(0.0f) == 0.0f);
  CHECK(gelu(10.0f) == doctest::Approx(10.0f));
}

TEST_CASE("all_finite detects NaN") {
  auto a = DenseArray::zeros({3});
  CHECK(a.all_finite());
  a[1] = std::numeric_limits<float>::quiet_NaN();
  CHECK_FALSE(a.all_finite());
}

TEST_CASE("bundle keeps insertion order and rejects duplicates") {
  ParameterBundle b;
  b.insert("z", DenseArray::zeros({2}));
  b.insert("a", DenseArray::zeros({1, 3}));
  CHECK(b.entries()[0].first == "z");
  CHECK(b.num_elements() == 5);
  CHECK_THROWS_AS(b.insert("a", DenseArray::zeros({1})), ContractError);
  CHECK_THROWS_AS(b.assign("a", DenseArray::zeros({3})), DimensionError);
  CHECK_THROWS(b.get("missing"));
  const auto sig = b.shape_signature();
  CHECK(sig.size() == 2);
  CHECK(sig[1].second == std::vector<std::size_t>{1, 3});
}
