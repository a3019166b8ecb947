// SPDX-License-Identifier: Apache-2.0
//
// Double-precision reference for a two-layer network
//   logits = gelu(x W1 + b1) W2 + b2,  loss = mean softmax cross-entropy
// written with plain loops, plus central finite differences.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace oracle {

inline double gelu(double x) {
  const double c = std::sqrt(2.0 / 3.14159265358979323846);
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

struct Mlp {
  std::size_t in = 0, hidden = 0, out = 0;
  std::vector<double> w1, b1, w2, b2;  // row-major

  // All parameters flattened as w1 | b1 | w2 | b2.
  std::vector<double> flat() const {
    std::vector<double> p = w1;
    p.insert(p.end(), b1.begin(), b1.end());
    p.insert(p.end(), w2.begin(), w2.end());
    p.insert(p.end(), b2.begin(), b2.end());
    return p;
  }
  void assign(const std::vector<double>& p) {
    auto it = p.begin();
    std::copy(it, it + w1.size(), w1.begin());
    it += w1.size();
    std::copy(it, it + b1.size(), b1.begin());
    it += b1.size();
    std::copy(it, it + w2.size(), w2.begin());
    it += w2.size();
    std::copy(it, it + b2.size(), b2.begin());
  }
};

inline std::vector<double> mlp_logits(const Mlp& m, const std::vector<double>& x, std::size_t n) {
  std::vector<double> h(n * m.hidden), y(n * m.out);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < m.hidden; ++j) {
      double s = m.b1[j];
      for (std::size_t i = 0; i < m.in; ++i) s += x[r * m.in + i] * m.w1[i * m.hidden + j];
      h[r * m.hidden + j] = gelu(s);
    }
    for (std::size_t k = 0; k < m.out; ++k) {
      double s = m.b2[k];
      for (std::size_t j = 0; j < m.hidden; ++j) s += h[r * m.hidden + j] * m.w2[j * m.out + k];
      y[r * m.out + k] = s;
    }
  }
  return y;
}

inline double cross_entropy(const std::vector<double>& logits, std::size_t n, std::size_t classes,
                            const std::vector<int>& labels) {
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double mx = logits[r * classes];
    for (std::size_t k = 1; k < classes; ++k) mx = std::max(mx, logits[r * classes + k]);
    double z = 0.0;
    for (std::size_t k = 0; k < classes; ++k) z += std::exp(logits[r * classes + k] - mx);
    total += std::log(z) + mx - logits[r * classes + labels[r]];
  }
  return total / static_cast<double>(n);
}

inline double mlp_loss(const Mlp& m, const std::vector<double>& x, std::size_t n, const std::vector<int>& labels) {
  return cross_entropy(mlp_logits(m, x, n), n, m.out, labels);
}

inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> p, double eps) {
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + eps;
    const double up = f(p);
    p[i] = keep - eps;
    const double down = f(p);
    p[i] = keep;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(d) / scale;
}

}  // namespace oracle
