// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode gradient tape over DenseArray values. Nodes are recorded in
// creation order, which is already a topological order, so backward() is a
// single reverse sweep.
#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dam/parameter_bundle.hpp"
#include "dam/tensor.hpp"

namespace dam {

struct Var {
  std::size_t index = 0;
};

class GradientTape {
 public:
  // Frozen input: never receives a gradient.
  Var constant(DenseArray value);
  // Trainable leaf; its gradient is reported under `name`.
  Var parameter(std::string name, DenseArray value);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var add_bias(Var x, Var bias);
  Var gelu(Var x);
  Var sum(Var x);
  Var scale(Var x, float s);
  // Mean softmax cross-entropy over the rows of `logits`.
  Var softmax_cross_entropy(Var logits, std::span<const int> labels);

  const DenseArray& value(Var v) const { return nodes_.at(v.index).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.index).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Gradients of the scalar `loss` for every trainable parameter on the tape.
  GradientMap backward(Var loss);

 private:
  struct Node {
    DenseArray value;
    DenseArray grad;
    bool requires_grad = false;
    std::optional<std::string> param_name;
    std::function<void(GradientTape&, const Node&)> backprop;
  };

  Var push(DenseArray value, bool requires_grad, std::function<void(GradientTape&, const Node&)> backprop);
  void accumulate(std::size_t index, const DenseArray& g);

  std::vector<Node> nodes_;
};

}  // namespace dam
