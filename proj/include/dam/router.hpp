// SPDX-License-Identifier: Apache-2.0
//
// Non-parametric router: one feature centroid per observed dataset, cosine
// similarity to each centroid, temperature softmax.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dam/backbone.hpp"
#include "dam/data.hpp"
#include "dam/tensor.hpp"

namespace dam {

// Probability per dataset, in arrival order.
using ProbabilityVector = std::vector<double>;

struct RouterState {
  std::vector<DenseArray> centroids;
  std::vector<std::size_t> counts;
  double temperature = 0.01;

  std::size_t size() const noexcept { return centroids.size(); }
  void add(DenseArray centroid, std::size_t count);
  // First `t` centroids, as the router looked after stage t.
  RouterState prefix(std::size_t t) const;

  friend bool operator==(const RouterState&, const RouterState&) = default;
};

// Arithmetic mean of the rows of a [n x d] feature matrix.
DenseArray fit_centroid(const DenseArray& features);
// Mean adapter-free feature over the dataset's train split.
DenseArray fit_centroid(const DomainDataset& dataset, const Backbone& backbone);

double cosine_similarity(std::span<const float> a, std::span<const float> b);
std::vector<double> centroid_similarities(const DenseArray& feature, const RouterState& state);
// exp(l/tau) normalised, with max subtraction.
ProbabilityVector temperature_softmax(std::span<const double> logits, double temperature);

ProbabilityVector route(const DenseArray& feature, const RouterState& state);
ProbabilityVector route_sample(const DenseArray& sample, const RouterState& state, const Backbone& backbone);

// Keep the k largest entries (ties to the lower index), rescale to sum 1.
ProbabilityVector topk_renormalize(std::span<const double> p, std::size_t k);
// Lowest index among the maxima.
std::size_t argmax(std::span<const double> p);

// Fraction of rows of `features` whose argmax route equals `identities`.
double router_accuracy(const DenseArray& features, std::span<const int> identities, const RouterState& state);

}  // namespace dam
