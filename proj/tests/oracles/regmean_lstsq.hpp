// SPDX-License-Identifier: Apache-2.0
//
// Dense least-squares reference for RegMean: the minimiser of
//   sum_i ||X_i W - X_i W_i||^2 + lambda ||W||^2
// obtained by column-pivoted QR on the stacked system, never forming the
// Gram matrices.
#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline Eigen::MatrixXd regmean_least_squares(const std::vector<Eigen::MatrixXd>& xs,
                                             const std::vector<Eigen::MatrixXd>& ws, double lambda) {
  const Eigen::Index n = ws.front().rows(), m = ws.front().cols();
  Eigen::Index rows = n;
  for (const auto& x : xs) rows += x.rows();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, n), b = Eigen::MatrixXd::Zero(rows, m);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    a.middleRows(at, xs[i].rows()) = xs[i];
    b.middleRows(at, xs[i].rows()) = xs[i] * ws[i];
    at += xs[i].rows();
  }
  a.middleRows(at, n) = std::sqrt(lambda) * Eigen::MatrixXd::Identity(n, n);
  return a.colPivHouseholderQr().solve(b);
}

inline double regmean_objective(const std::vector<Eigen::MatrixXd>& xs, const std::vector<Eigen::MatrixXd>& ws,
                                double lambda, const Eigen::MatrixXd& w) {
  double total = lambda * w.squaredNorm();
  for (std::size_t i = 0; i < xs.size(); ++i) total += (xs[i] * w - xs[i] * ws[i]).squaredNorm();
  return total;
}

}  // namespace oracle
