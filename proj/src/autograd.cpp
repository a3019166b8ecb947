// SPDX-License-Identifier: Apache-2.0
#include "dam/autograd.hpp"

#include <algorithm>
#include <cmath>

#include "dam/error.hpp"

namespace dam {

Var GradientTape::push(DenseArray value, bool requires_grad,
                       std::function<void(GradientTape&, const Node&)> backprop) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

void GradientTape::accumulate(std::size_t index, const DenseArray& g) {
  Node& n = nodes_[index];
  if (!n.requires_grad) return;
  if (n.grad.empty()) {
    n.grad = g;
  } else {
    auto dst = n.grad.data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

Var GradientTape::constant(DenseArray value) { return push(std::move(value), false, nullptr); }

Var GradientTape::parameter(std::string name, DenseArray value) {
  Var v = push(std::move(value), true, [](GradientTape&, const Node&) {});
  nodes_[v.index].param_name = std::move(name);
  return v;
}

Var GradientTape::matmul(Var a, Var b) {
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(dam::matmul(value(a), value(b)), rg, [a, b](GradientTape& t, const Node& self) {
    if (t.requires_grad(a)) t.accumulate(a.index, dam::matmul(self.grad, transpose(t.value(b))));
    if (t.requires_grad(b)) t.accumulate(b.index, dam::matmul(transpose(t.value(a)), self.grad));
  });
}

Var GradientTape::add(Var a, Var b) {
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(dam::add(value(a), value(b)), rg, [a, b](GradientTape& t, const Node& self) {
    t.accumulate(a.index, self.grad);
    t.accumulate(b.index, self.grad);
  });
}

Var GradientTape::add_bias(Var x, Var bias) {
  const bool rg = requires_grad(x) || requires_grad(bias);
  return push(add_row_bias(value(x), value(bias)), rg, [x, bias](GradientTape& t, const Node& self) {
    t.accumulate(x.index, self.grad);
    if (t.requires_grad(bias)) t.accumulate(bias.index, sum_rows(self.grad));
  });
}

Var GradientTape::gelu(Var x) {
  return push(dam::gelu(value(x)), requires_grad(x), [x](GradientTape& t, const Node& self) {
    DenseArray g = self.grad;
    const auto xv = t.value(x).data();
    auto gv = g.data();
    for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= gelu_derivative(xv[i]);
    t.accumulate(x.index, g);
  });
}

Var GradientTape::sum(Var x) {
  const auto s = static_cast<float>(dam::sum(value(x)));
  return push(DenseArray::scalar(s), requires_grad(x), [x](GradientTape& t, const Node& self) {
    t.accumulate(x.index, DenseArray::filled(t.value(x).shape(), self.grad[0]));
  });
}

Var GradientTape::scale(Var x, float s) {
  return push(dam::scale(value(x), s), requires_grad(x), [x, s](GradientTape& t, const Node& self) {
    t.accumulate(x.index, dam::scale(self.grad, s));
  });
}

Var GradientTape::softmax_cross_entropy(Var logits, std::span<const int> labels) {
  const DenseArray& z = value(logits);
  const std::size_t n = z.rows(), k = z.cols();
  if (labels.size() != n) throw DimensionError("softmax_cross_entropy: label count does not match batch");
  DenseArray probs({n, k});
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw ContractError("softmax_cross_entropy: label out of range");
    }
    float mx = z.at(i, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, z.at(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) denom += std::exp(static_cast<double>(z.at(i, j) - mx));
    for (std::size_t j = 0; j < k; ++j) {
      probs.at(i, j) = static_cast<float>(std::exp(static_cast<double>(z.at(i, j) - mx)) / denom);
    }
    loss += std::log(denom) - static_cast<double>(z.at(i, labels[i]) - mx);
  }
  loss /= static_cast<double>(n);
  std::vector<int> owned(labels.begin(), labels.end());
  return push(DenseArray::scalar(static_cast<float>(loss)), requires_grad(logits),
              [logits, probs = std::move(probs), owned = std::move(owned)](GradientTape& t, const Node& self) {
                DenseArray g = probs;
                const std::size_t rows = g.rows();
                for (std::size_t i = 0; i < rows; ++i) g.at(i, static_cast<std::size_t>(owned[i])) -= 1.0f;
                t.accumulate(logits.index, dam::scale(g, self.grad[0] / static_cast<float>(rows)));
              });
}

GradientMap GradientTape::backward(Var loss) {
  if (loss.index >= nodes_.size()) throw ContractError("backward: loss is not on this tape");
  if (value(loss).size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " + shape_string(value(loss).shape()));
  }
  for (auto& n : nodes_) n.grad = DenseArray();
  if (nodes_[loss.index].requires_grad) {
    nodes_[loss.index].grad = DenseArray::filled(value(loss).shape(), 1.0f);
    for (std::size_t i = loss.index + 1; i-- > 0;) {
      const Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty()) continue;
      n.backprop(*this, n);
    }
  }
  GradientMap grads;
  for (const auto& n : nodes_) {
    if (!n.param_name) continue;
    grads[*n.param_name] = n.grad.empty() ? DenseArray::zeros(n.value.shape()) : n.grad;
  }
  return grads;
}

}  // namespace dam
