// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dam/composer.hpp"
#include "dam/data.hpp"
#include "dam/metrics.hpp"

namespace dam {

struct EvalOptions {
  std::size_t workers = 1;
};

// Predicted labels for a split. `identity` is the dataset's position in the
// sequence; only the oracle strategy reads it. Samples that resolve to the
// same composed adapter are evaluated as one batch.
std::vector<int> predict_split(const Composer& composer, const DomainDataset& dataset, Split split, int identity,
                               const EvalOptions& options = {});
double evaluate_accuracy(const Composer& composer, const DomainDataset& dataset, Split split, int identity,
                         const EvalOptions& options = {});

// Accuracy of one fixed adapter (or none) on a split.
double evaluate_fixed(const Backbone& backbone, const ParameterBundle* adapter, const DomainDataset& dataset,
                      Split split);

// Row t of the score matrix: accuracy on the test splits of datasets 1..t.
std::vector<double> evaluate_row(const Composer& composer, std::span<const DomainDataset> datasets,
                                 const EvalOptions& options = {});

// Full score matrix for a strategy. Because earlier adapters and centroids
// are frozen, the state after stage t is the length-t prefix of the final
// bank and router.
ScoreMatrix prefix_score_matrix(const Backbone& backbone, const AdapterBank& bank, const RouterState& router,
                                std::span<const GramStats> grams, std::span<const DomainDataset> datasets,
                                const ComposerConfig& config, const EvalOptions& options = {});

// Argmax router accuracy over the test splits, identities = positions.
double suite_router_accuracy(const Backbone& backbone, const RouterState& router,
                             std::span<const DomainDataset> datasets);

struct SweepRow {
  double target_accuracy = 0.0;
  double router_accuracy = 0.0;  // measured argmax accuracy of the degraded router
  double merged_accuracy = 0.0;
  double argmax_accuracy = 0.0;
  double gain = 0.0;
  double gain_over_argmax = 0.0;       // gain / argmax accuracy
  double gain_over_upper_bound = 0.0;  // gain / oracle-identity accuracy
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double upper_bound_accuracy = 0.0;
  double rank_correlation = 0.0;  // Spearman of (router accuracy, gain)
};

// Merged (top-k renormalised) versus argmax-selected adapters under
// degraded routers of each target accuracy, over all test splits.
SweepResult merging_gain_sweep(const Backbone& backbone, const AdapterBank& bank,
                               std::span<const DomainDataset> datasets, std::span<const double> targets,
                               std::size_t top_k, std::uint64_t seed);

}  // namespace dam
