// SPDX-License-Identifier: Apache-2.0
//
// Continual-learning metrics over the lower-triangular score matrix
// S[t][tau] (accuracy on dataset tau after training stage t), plus the
// manually degraded routers used to study merging gain against router
// accuracy. Stages are 1-based in this API.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dam/router.hpp"

namespace dam {

class ScoreMatrix {
 public:
  ScoreMatrix() = default;
  explicit ScoreMatrix(std::vector<std::vector<double>> rows);

  // Row t must hold exactly t accuracies in [0, 1].
  void append_row(std::vector<double> row);

  std::size_t stages() const noexcept { return rows_.size(); }
  const std::vector<double>& row(std::size_t t) const;
  double at(std::size_t t, std::size_t tau) const;
  const std::vector<std::vector<double>>& rows() const noexcept { return rows_; }

  friend bool operator==(const ScoreMatrix&, const ScoreMatrix&) = default;

 private:
  std::vector<std::vector<double>> rows_;
};

// A_t = mean of row t.
double average_accuracy(const ScoreMatrix& s, std::size_t t);
// F_t = (1/t) sum_tau max_{tau <= t' <= t} (S[t'][tau] - S[t][tau]); never negative.
double forgetting(const ScoreMatrix& s, std::size_t t);

struct MetricsReport {
  std::string strategy;
  std::size_t top_k = 0;
  double average_accuracy = 0.0;
  std::optional<double> forgetting;
  std::vector<double> per_dataset;
  std::optional<double> router_accuracy;
  std::optional<ScoreMatrix> scores;
};

// Report from a complete score matrix: final-row accuracies, A_T and F_T.
MetricsReport make_report(std::string strategy, std::size_t top_k, const ScoreMatrix& scores,
                          std::optional<double> router_accuracy);
// Report from final accuracies only (no history, so no forgetting).
MetricsReport make_final_report(std::string strategy, std::size_t top_k, std::vector<double> per_dataset,
                                std::optional<double> router_accuracy);

// Synthetic router outputs of a prescribed accuracy: exactly
// round(target * n) samples peak (mass 0.9) at their true identity, the rest
// at a uniformly drawn wrong identity; leftover mass is spread uniformly.
std::vector<ProbabilityVector> degrade_router(std::span<const int> true_identities, double target_accuracy,
                                              std::size_t num_datasets, std::uint64_t seed);

inline constexpr double kDegradedPeakMass = 0.9;

// Spearman rank correlation with average ranks for ties; 0 when either
// side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace dam
