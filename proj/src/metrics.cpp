// SPDX-License-Identifier: Apache-2.0
#include "dam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dam/error.hpp"

namespace dam {

ScoreMatrix::ScoreMatrix(std::vector<std::vector<double>> rows) {
  for (auto& r : rows) append_row(std::move(r));
}

void ScoreMatrix::append_row(std::vector<double> row) {
  if (row.size() != rows_.size() + 1) {
    throw ContractError("ScoreMatrix: row " + std::to_string(rows_.size() + 1) + " needs " +
                        std::to_string(rows_.size() + 1) + " entries, got " + std::to_string(row.size()));
  }
  for (double v : row) {
    if (!(v >= 0.0 && v <= 1.0)) throw ContractError("ScoreMatrix: accuracy outside [0, 1]");
  }
  rows_.push_back(std::move(row));
}

const std::vector<double>& ScoreMatrix::row(std::size_t t) const {
  if (t < 1 || t > rows_.size()) {
    throw ContractError("ScoreMatrix: stage " + std::to_string(t) + " not recorded (have " +
                        std::to_string(rows_.size()) + ")");
  }
  return rows_[t - 1];
}

double ScoreMatrix::at(std::size_t t, std::size_t tau) const {
  const auto& r = row(t);
  if (tau < 1 || tau > t) throw ContractError("ScoreMatrix: entry above the diagonal");
  return r[tau - 1];
}

double average_accuracy(const ScoreMatrix& s, std::size_t t) {
  const auto& r = s.row(t);
  double total = 0.0;
  for (double v : r) total += v;
  return total / static_cast<double>(t);
}

double forgetting(const ScoreMatrix& s, std::size_t t) {
  s.row(t);
  double total = 0.0;
  for (std::size_t tau = 1; tau <= t; ++tau) {
    const double final_acc = s.at(t, tau);
    double best_gap = 0.0;  // t' = t contributes zero
    for (std::size_t tp = tau; tp <= t; ++tp) best_gap = std::max(best_gap, s.at(tp, tau) - final_acc);
    total += best_gap;
  }
  return total / static_cast<double>(t);
}

MetricsReport make_report(std::string strategy, std::size_t top_k, const ScoreMatrix& scores,
                          std::optional<double> router_accuracy) {
  const std::size_t t = scores.stages();
  MetricsReport r;
  r.strategy = std::move(strategy);
  r.top_k = top_k;
  r.average_accuracy = average_accuracy(scores, t);
  r.forgetting = forgetting(scores, t);
  r.per_dataset = scores.row(t);
  r.router_accuracy = router_accuracy;
  r.scores = scores;
  return r;
}

MetricsReport make_final_report(std::string strategy, std::size_t top_k, std::vector<double> per_dataset,
                                std::optional<double> router_accuracy) {
  if (per_dataset.empty()) throw ContractError("make_final_report: no datasets");
  MetricsReport r;
  r.strategy = std::move(strategy);
  r.top_k = top_k;
  r.average_accuracy = std::accumulate(per_dataset.begin(), per_dataset.end(), 0.0) /
                       static_cast<double>(per_dataset.size());
  r.per_dataset = std::move(per_dataset);
  r.router_accuracy = router_accuracy;
  return r;
}

std::vector<ProbabilityVector> degrade_router(std::span<const int> true_identities, double target_accuracy,
                                              std::size_t num_datasets, std::uint64_t seed) {
  if (!(target_accuracy >= 0.0 && target_accuracy <= 1.0)) {
    throw InputError("degrade_router: target accuracy must lie in [0, 1]");
  }
  if (num_datasets < 1) throw ContractError("degrade_router: need at least one dataset");
  const std::size_t n = true_identities.size();
  for (int id : true_identities) {
    if (id < 0 || static_cast<std::size_t>(id) >= num_datasets) throw ContractError("degrade_router: identity out of range");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_correct = static_cast<std::size_t>(std::llround(target_accuracy * static_cast<double>(n)));
  if (num_datasets == 1) n_correct = n;
  std::vector<bool> correct(n, false);
  for (std::size_t i = 0; i < n_correct; ++i) correct[order[i]] = true;

  std::vector<ProbabilityVector> out;
  out.reserve(n);
  const double rest = num_datasets > 1 ? (1.0 - kDegradedPeakMass) / static_cast<double>(num_datasets - 1) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto truth = static_cast<std::size_t>(true_identities[i]);
    std::size_t peak = truth;
    if (!correct[i]) {
      std::uniform_int_distribution<std::size_t> pick(0, num_datasets - 2);
      peak = pick(rng);
      if (peak >= truth) ++peak;
    }
    ProbabilityVector p(num_datasets, rest);
    p[peak] = num_datasets > 1 ? kDegradedPeakMass : 1.0;
    out.push_back(std::move(p));
  }
  return out;
}

namespace {
std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}
}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ContractError("spearman: length mismatch");
  if (x.size() < 2) return 0.0;
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace dam
