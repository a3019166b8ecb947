// SPDX-License-Identifier: Apache-2.0
#include "dam/composer.hpp"

#include <cmath>
#include <numeric>

#include "dam/error.hpp"

namespace dam {

void AdapterBank::append(ParameterBundle adapter) {
  if (bundles_.empty()) {
    signature_ = adapter.shape_signature();
  } else if (adapter.shape_signature() != signature_) {
    throw ContractError("AdapterBank: adapter signature differs from the bank's");
  }
  bundles_.push_back(std::move(adapter));
}

AdapterBank AdapterBank::prefix(std::size_t t) const {
  if (t > size()) throw ContractError("AdapterBank: prefix longer than the bank");
  AdapterBank out;
  for (std::size_t i = 0; i < t; ++i) out.append(bundles_[i]);
  return out;
}

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::DynamicMerge: return "dynamic_merge";
    case Strategy::ArgmaxSelect: return "argmax_select";
    case Strategy::StaticAverage: return "static_average";
    case Strategy::StaticRegMean: return "static_regmean";
    case Strategy::OracleIdentity: return "oracle_identity";
  }
  return "?";
}

Strategy parse_strategy(const std::string& name) {
  if (name == "dynamic_merge" || name == "merge") return Strategy::DynamicMerge;
  if (name == "argmax_select" || name == "argmax") return Strategy::ArgmaxSelect;
  if (name == "static_average" || name == "average") return Strategy::StaticAverage;
  if (name == "static_regmean" || name == "regmean") return Strategy::StaticRegMean;
  if (name == "oracle_identity" || name == "oracle") return Strategy::OracleIdentity;
  throw InputError("unknown strategy '" + name + "'");
}

namespace {
void check_probabilities(const AdapterBank& bank, std::span<const double> p) {
  if (bank.empty()) throw InputError("composer: empty adapter bank");
  if (p.size() != bank.size()) {
    throw ContractError("composer: " + std::to_string(p.size()) + " probabilities for " + std::to_string(bank.size()) +
                        " adapters");
  }
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw ContractError("composer: probability outside [0, 1]");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-6) throw ContractError("composer: probabilities do not sum to 1");
}
}  // namespace

ParameterBundle dynamic_merge(const AdapterBank& bank, std::span<const double> p, MergeCounter* counter) {
  check_probabilities(bank, p);
  ParameterBundle out;
  for (const auto& [name, shape] : bank.signature()) {
    const std::size_t n = shape_product(shape);
    std::vector<double> acc(n, 0.0);
    bool first = true;
    for (std::size_t t = 0; t < bank.size(); ++t) {
      if (p[t] == 0.0) continue;
      const auto src = bank[t].get(name).data();
      if (first) {
        for (std::size_t i = 0; i < n; ++i) acc[i] = p[t] * src[i];
        if (counter) counter->multiply_adds += n;
        first = false;
      } else {
        for (std::size_t i = 0; i < n; ++i) acc[i] += p[t] * src[i];
        if (counter) counter->multiply_adds += 2 * n;
      }
    }
    out.insert(name, DenseArray(shape, std::vector<float>(acc.begin(), acc.end())));
  }
  return out;
}

std::uint64_t merge_cost(const ShapeSignature& signature, std::size_t k) {
  if (k == 0) return 0;
  std::uint64_t elements = 0;
  for (const auto& [_, shape] : signature) elements += shape_product(shape);
  return elements * (2 * k - 1);
}

ParameterBundle argmax_select(const AdapterBank& bank, std::span<const double> p) {
  check_probabilities(bank, p);
  return bank[argmax(p)];
}

ParameterBundle static_average(const AdapterBank& bank) {
  if (bank.empty()) throw InputError("static_average: empty adapter bank");
  const ProbabilityVector uniform(bank.size(), 1.0 / static_cast<double>(bank.size()));
  return dynamic_merge(bank, uniform);
}

namespace {

// Solves (A) X = B for symmetric positive definite A via Cholesky, in place.
void cholesky_solve(std::vector<double>& a, std::size_t n, std::vector<double>& b, std::size_t m) {
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0.0)) throw NumericalError("static_regmean: accumulated Gram matrix is singular");
    const double l = std::sqrt(d);
    a[j * n + j] = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / l;
    }
  }
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = b[i * m + c];
      for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k * m + c];
      b[i * m + c] = s / a[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = b[i * m + c];
      for (std::size_t k = i + 1; k < n; ++k) s -= a[k * n + i] * b[k * m + c];
      b[i * m + c] = s / a[i * n + i];
    }
  }
}

}  // namespace

ParameterBundle static_regmean(const AdapterBank& bank, std::span<const GramStats> grams) {
  if (bank.empty()) throw InputError("static_regmean: empty adapter bank");
  if (grams.size() != bank.size()) throw ContractError("static_regmean: need Gram statistics for every adapter");
  ParameterBundle out = static_average(bank);
  for (const auto& [name, shape] : bank.signature()) {
    if (!grams[0].count(name)) continue;
    if (shape.size() != 2) throw ContractError("static_regmean: '" + name + "' is not a matrix");
    const std::size_t n = shape[0], m = shape[1];
    std::vector<double> a(n * n, 0.0), b(n * m, 0.0);
    for (std::size_t t = 0; t < bank.size(); ++t) {
      auto it = grams[t].find(name);
      if (it == grams[t].end()) throw ContractError("static_regmean: dataset " + std::to_string(t) + " lacks '" + name + "'");
      const DenseArray& g = it->second;
      if (g.shape() != std::vector<std::size_t>{n, n}) throw DimensionError("static_regmean: Gram shape mismatch for '" + name + "'");
      const DenseArray& w = bank[t].get(name);
      for (std::size_t i = 0; i < n * n; ++i) a[i] += g[i];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
          const double gik = g[i * n + k];
          if (gik == 0.0) continue;
          for (std::size_t j = 0; j < m; ++j) b[i * m + j] += gik * w[k * m + j];
        }
    }
    double mean_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_diag += a[i * n + i];
    mean_diag /= static_cast<double>(n);
    const double ridge = 1e-4 * mean_diag;
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] += ridge;
    cholesky_solve(a, n, b, m);
    std::vector<float> merged(b.begin(), b.end());
    for (float v : merged)
      if (!std::isfinite(v)) throw NumericalError("static_regmean: non-finite solution for '" + name + "'");
    out.assign(name, DenseArray(shape, std::move(merged)));
  }
  return out;
}

Composer::Composer(const Backbone& backbone, const AdapterBank& bank, const RouterState& router,
                   ComposerConfig config, std::span<const GramStats> grams)
    : backbone_(backbone), bank_(bank), router_(router), config_(config) {
  if (bank_.empty()) throw InputError("composer: empty adapter bank");
  if (config_.top_k < 1) throw ContractError("composer: top_k must be positive");
  const bool needs_router = config_.strategy == Strategy::DynamicMerge || config_.strategy == Strategy::ArgmaxSelect;
  if (needs_router && router_.size() != bank_.size()) {
    throw ContractError("composer: router has " + std::to_string(router_.size()) + " centroids for " +
                        std::to_string(bank_.size()) + " adapters");
  }
  top_k_ = std::min(config_.top_k, bank_.size());
  if (config_.strategy == Strategy::StaticAverage) static_adapter_ = static_average(bank_);
  if (config_.strategy == Strategy::StaticRegMean) static_adapter_ = static_regmean(bank_, grams);
}

ProbabilityVector Composer::probabilities(const DenseArray& sample) const {
  return topk_renormalize(route_sample(sample, router_, backbone_), top_k_);
}

ParameterBundle Composer::compose(std::span<const double> p, std::optional<int> identity) const {
  switch (config_.strategy) {
    case Strategy::DynamicMerge: return dynamic_merge(bank_, p);
    case Strategy::ArgmaxSelect: return argmax_select(bank_, p);
    case Strategy::StaticAverage:
    case Strategy::StaticRegMean: return *static_adapter_;
    case Strategy::OracleIdentity:
      if (!identity || *identity < 0 || static_cast<std::size_t>(*identity) >= bank_.size()) {
        throw ContractError("oracle_identity: a valid dataset identity is required");
      }
      return bank_[static_cast<std::size_t>(*identity)];
  }
  throw ContractError("composer: unknown strategy");
}

DenseArray Composer::predict(const DenseArray& sample, std::optional<int> identity) const {
  switch (config_.strategy) {
    case Strategy::DynamicMerge:
    case Strategy::ArgmaxSelect: return backbone_.logits(sample, compose(probabilities(sample)));
    default: return backbone_.logits(sample, compose({}, identity));
  }
}

DenseArray compose_and_predict(const DenseArray& sample, const Backbone& backbone, const AdapterBank& bank,
                               const RouterState& router, const ComposerConfig& config,
                               std::optional<int> identity, std::span<const GramStats> grams) {
  const Composer composer(backbone, bank, router, config, grams);
  return composer.predict(sample, identity);
}

}  // namespace dam
