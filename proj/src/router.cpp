// SPDX-License-Identifier: Apache-2.0
#include "dam/router.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dam/error.hpp"

namespace dam {

void RouterState::add(DenseArray centroid, std::size_t count) {
  if (count == 0) throw ContractError("router: a centroid needs at least one contributing sample");
  if (!centroids.empty() && centroid.shape() != centroids.front().shape()) {
    throw DimensionError("router: centroid shape mismatch");
  }
  centroids.push_back(std::move(centroid));
  counts.push_back(count);
}

RouterState RouterState::prefix(std::size_t t) const {
  if (t > size()) throw ContractError("router: prefix longer than the number of centroids");
  RouterState out;
  out.temperature = temperature;
  out.centroids.assign(centroids.begin(), centroids.begin() + static_cast<std::ptrdiff_t>(t));
  out.counts.assign(counts.begin(), counts.begin() + static_cast<std::ptrdiff_t>(t));
  return out;
}

DenseArray fit_centroid(const DenseArray& features) {
  if (features.rank() != 2 || features.rows() == 0) throw InputError("fit_centroid: empty feature set");
  const std::size_t n = features.rows(), d = features.cols();
  std::vector<double> acc(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) acc[j] += features.at(i, j);
  std::vector<float> mean(d);
  for (std::size_t j = 0; j < d; ++j) mean[j] = static_cast<float>(acc[j] / static_cast<double>(n));
  return DenseArray::vector(std::move(mean));
}

DenseArray fit_centroid(const DomainDataset& dataset, const Backbone& backbone) {
  if (dataset.train.empty()) throw InputError("fit_centroid: dataset '" + dataset.name + "' has no train samples");
  return fit_centroid(backbone.features(dataset.features(Split::Train)));
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw DegenerateSimilarityError("cosine similarity undefined for a zero-norm vector");
  return dot(a, b) / (na * nb);
}

std::vector<double> centroid_similarities(const DenseArray& feature, const RouterState& state) {
  std::vector<double> sims;
  sims.reserve(state.size());
  for (const auto& c : state.centroids) {
    if (c.size() != feature.size()) throw DimensionError("route: feature length does not match centroids");
    sims.push_back(cosine_similarity(feature.data(), c.data()));
  }
  return sims;
}

ProbabilityVector temperature_softmax(std::span<const double> logits, double temperature) {
  if (logits.empty()) throw ContractError("softmax over an empty vector");
  if (!(temperature > 0.0)) throw ContractError("temperature must be positive");
  const double mx = *std::max_element(logits.begin(), logits.end());
  ProbabilityVector p(logits.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - mx) / temperature);
    denom += p[i];
  }
  for (auto& v : p) v /= denom;
  return p;
}

ProbabilityVector route(const DenseArray& feature, const RouterState& state) {
  if (state.size() == 0) throw ContractError("route: router has no centroids");
  const auto sims = centroid_similarities(feature, state);
  return temperature_softmax(sims, state.temperature);
}

ProbabilityVector route_sample(const DenseArray& sample, const RouterState& state, const Backbone& backbone) {
  return route(backbone.features(sample), state);
}

std::size_t argmax(std::span<const double> p) {
  if (p.empty()) throw ContractError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (p[i] > p[best]) best = i;
  return best;
}

ProbabilityVector topk_renormalize(std::span<const double> p, std::size_t k) {
  if (k < 1 || k > p.size()) {
    throw ContractError("topk_renormalize: k=" + std::to_string(k) + " outside [1, " + std::to_string(p.size()) + "]");
  }
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  ProbabilityVector out(p.size(), 0.0);
  double kept = 0.0;
  for (std::size_t i = 0; i < k; ++i) kept += p[order[i]];
  if (!(kept > 0.0)) throw NumericalError("topk_renormalize: kept mass is zero");
  for (std::size_t i = 0; i < k; ++i) out[order[i]] = p[order[i]] / kept;
  return out;
}

double router_accuracy(const DenseArray& features, std::span<const int> identities, const RouterState& state) {
  if (features.rows() != identities.size()) throw ContractError("router_accuracy: identity count mismatch");
  if (identities.empty()) throw InputError("router_accuracy: no samples");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto p = route(features.row(i), state);
    hit += static_cast<int>(argmax(p)) == identities[i];
  }
  return static_cast<double>(hit) / static_cast<double>(identities.size());
}

}  // namespace dam
