// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "dam/autograd.hpp"
#include "dam/error.hpp"
#include "oracles/gradient_check.hpp"
#include "oracles/reference_mlp.hpp"
#include "support.hpp"

using namespace dam;

TEST_CASE("gradient of sum(W x) is x broadcast over the rows of W") {
  GradientTape tape;
  auto w = tape.parameter("w", DenseArray::matrix({{1, 2, 3}, {4, 5, 6}}));
  auto x = tape.constant(DenseArray::matrix({{0.5f}, {-1.0f}, {2.0f}}));
  const auto g = tape.backward(tape.sum(tape.matmul(w, x))).at("w");
  CHECK(g == DenseArray::matrix({{0.5f, -1.0f, 2.0f}, {0.5f, -1.0f, 2.0f}}));
}

TEST_CASE("softmax cross-entropy gradient at uniform logits") {
  GradientTape tape;
  auto logits = tape.parameter("z", DenseArray::matrix({{0.0f, 0.0f, 0.0f}}));
  const std::vector<int> labels{0};
  const auto g = tape.backward(tape.softmax_cross_entropy(logits, labels)).at("z");
  CHECK(g[0] == doctest::Approx(-2.0 / 3.0).epsilon(1e-6));
  CHECK(g[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  CHECK(g[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  CHECK(tape.value(tape.softmax_cross_entropy(logits, labels))[0] == doctest::Approx(std::log(3.0)));
}

TEST_CASE("random two-layer networks match central differences") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto r = oracle::check_random_mlp(seed);
    CAPTURE(seed);
    CHECK(r.relative_error < 1e-3);
  }
}

TEST_CASE("each op matches central differences") {
  std::mt19937_64 rng(11);
  const auto a0 = testing::random_array(rng, {3, 4});
  const auto b0 = testing::random_array(rng, {4, 2});
  const auto bias0 = testing::random_array(rng, {2});

  // loss = sum(scale(gelu(add(a b + bias, a b)), 0.7)) exercises every op.
  auto tape_loss = [&](const DenseArray& a, const DenseArray& b, const DenseArray& bias, GradientMap* grads) {
    GradientTape tape;
    auto av = tape.parameter("a", a), bv = tape.parameter("b", b), cv = tape.parameter("bias", bias);
    auto ab = tape.matmul(av, bv);
    auto loss = tape.sum(tape.scale(tape.gelu(tape.add(tape.add_bias(ab, cv), ab)), 0.7f));
    if (grads) *grads = tape.backward(loss);
    return static_cast<double>(tape.value(loss)[0]);
  };
  auto reference = [&](const std::vector<double>& p) {
    // p = a | b | bias in double
    double total = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < 4; ++k) s += p[i * 4 + k] * p[12 + k * 2 + j];
        total += 0.7 * oracle::gelu(2.0 * s + p[20 + j]);
      }
    return total;
  };
  GradientMap grads;
  tape_loss(a0, b0, bias0, &grads);
  std::vector<double> p, analytic;
  for (const auto* arr : {&a0, &b0, &bias0}) p.insert(p.end(), arr->data().begin(), arr->data().end());
  for (const char* n : {"a", "b", "bias"}) analytic.insert(analytic.end(), grads.at(n).data().begin(), grads.at(n).data().end());
  CHECK(oracle::relative_error(analytic, oracle::central_difference(reference, p, 1e-3)) < 1e-3);
}

TEST_CASE("constants receive no gradient and unreachable parameters get zeros") {
  GradientTape tape;
  auto x = tape.constant(DenseArray::vector({1, 2}));
  auto unused = tape.parameter("unused", DenseArray::vector({3, 4}));
  auto w = tape.parameter("w", DenseArray::vector({1, 1}));
  const auto grads = tape.backward(tape.sum(tape.add(x, w)));
  CHECK(grads.count("unused") == 1);
  CHECK(grads.at("unused") == DenseArray::zeros({2}));
  CHECK(grads.at("w") == DenseArray::vector({1, 1}));
  CHECK_FALSE(tape.requires_grad(x));
  (void)unused;
}

TEST_CASE("gradients have the shapes of their parameters") {
  std::mt19937_64 rng(2);
  GradientTape tape;
  auto x = tape.constant(testing::random_array(rng, {5, 3}));
  auto w = tape.parameter("w", testing::random_array(rng, {3, 4}));
  auto b = tape.parameter("b", testing::random_array(rng, {4}));
  const std::vector<int> labels{0, 1, 2, 3, 0};
  const auto grads = tape.backward(tape.softmax_cross_entropy(tape.add_bias(tape.matmul(x, w), b), labels));
  CHECK(grads.at("w").shape() == std::vector<std::size_t>{3, 4});
  CHECK(grads.at("b").shape() == std::vector<std::size_t>{4});
}

TEST_CASE("backward needs a scalar loss") {
  GradientTape tape;
  auto w = tape.parameter("w", DenseArray::vector({1, 2}));
  CHECK_THROWS_AS(tape.backward(w), ContractError);
}
