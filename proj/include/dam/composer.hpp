// SPDX-License-Identifier: Apache-2.0
//
// Composition of dataset-specific adapters into the single adapter used for
// a prediction: per-sample merging under router probabilities, argmax
// selection, and the static merging baselines.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dam/backbone.hpp"
#include "dam/parameter_bundle.hpp"
#include "dam/router.hpp"

namespace dam {

// Adapters A_1..A_T in arrival order; append-only, one shared signature.
class AdapterBank {
 public:
  void append(ParameterBundle adapter);

  std::size_t size() const noexcept { return bundles_.size(); }
  bool empty() const noexcept { return bundles_.empty(); }
  const ParameterBundle& operator[](std::size_t i) const { return bundles_.at(i); }
  const std::vector<ParameterBundle>& bundles() const noexcept { return bundles_; }
  const ShapeSignature& signature() const noexcept { return signature_; }
  AdapterBank prefix(std::size_t t) const;

  friend bool operator==(const AdapterBank& a, const AdapterBank& b) { return a.bundles_ == b.bundles_; }

 private:
  std::vector<ParameterBundle> bundles_;
  ShapeSignature signature_;
};

enum class Strategy { DynamicMerge, ArgmaxSelect, StaticAverage, StaticRegMean, OracleIdentity };

const char* strategy_name(Strategy s);
Strategy parse_strategy(const std::string& name);

struct ComposerConfig {
  Strategy strategy = Strategy::DynamicMerge;
  std::size_t top_k = 2;
};

// Multiply-adds performed while merging.
struct MergeCounter {
  std::uint64_t multiply_adds = 0;
};

// Element-wise sum_t p_t * A_t. Bundles with p_t == 0 are skipped, so a
// one-hot p reproduces the selected bundle bit-exactly.
ParameterBundle dynamic_merge(const AdapterBank& bank, std::span<const double> p, MergeCounter* counter = nullptr);
ParameterBundle argmax_select(const AdapterBank& bank, std::span<const double> p);
ParameterBundle static_average(const AdapterBank& bank);
// Entries named in the Gram statistics get the closed-form RegMean solution
// W = (sum G_i + lambda I)^-1 sum G_i W_i with lambda = 1e-4 * mean diag;
// every other entry is averaged uniformly.
ParameterBundle static_regmean(const AdapterBank& bank, std::span<const GramStats> grams);

// Merging cost for a signature when k probabilities are nonzero.
std::uint64_t merge_cost(const ShapeSignature& signature, std::size_t k);

// Bound composer over a frozen backbone, bank and router. Static merges are
// computed once at construction.
class Composer {
 public:
  Composer(const Backbone& backbone, const AdapterBank& bank, const RouterState& router, ComposerConfig config,
           std::span<const GramStats> grams = {});

  // Top-k renormalised router probabilities for a sample.
  ProbabilityVector probabilities(const DenseArray& sample) const;
  // Adapter for the given probabilities; `identity` is required by the
  // oracle strategy and ignored otherwise.
  ParameterBundle compose(std::span<const double> p, std::optional<int> identity = std::nullopt) const;
  DenseArray predict(const DenseArray& sample, std::optional<int> identity = std::nullopt) const;

  std::size_t effective_top_k() const noexcept { return top_k_; }
  const ComposerConfig& config() const noexcept { return config_; }
  const Backbone& backbone() const noexcept { return backbone_; }
  const AdapterBank& bank() const noexcept { return bank_; }
  const RouterState& router() const noexcept { return router_; }

 private:
  const Backbone& backbone_;
  const AdapterBank& bank_;
  const RouterState& router_;
  ComposerConfig config_;
  std::size_t top_k_;
  std::optional<ParameterBundle> static_adapter_;
};

DenseArray compose_and_predict(const DenseArray& sample, const Backbone& backbone, const AdapterBank& bank,
                               const RouterState& router, const ComposerConfig& config,
                               std::optional<int> identity = std::nullopt, std::span<const GramStats> grams = {});

}  // namespace dam
