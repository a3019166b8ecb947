// SPDX-License-Identifier: Apache-2.0
#include "dam/evaluation.hpp"

#include <atomic>
#include <cmath>
#include <map>
#include <thread>

#include "dam/error.hpp"

namespace dam {

namespace {

struct Group {
  ProbabilityVector p;
  std::vector<std::size_t> rows;
};

// Runs `fn(i)` for i in [0, n) on up to `workers` threads.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

DenseArray gather_rows(const DenseArray& x, std::span<const std::size_t> rows) {
  const std::size_t d = x.cols();
  std::vector<float> values;
  values.reserve(rows.size() * d);
  for (auto r : rows) values.insert(values.end(), x.data().begin() + r * d, x.data().begin() + (r + 1) * d);
  return DenseArray({rows.size(), d}, std::move(values));
}

std::vector<Group> group_by(std::vector<ProbabilityVector> keys) {
  std::map<ProbabilityVector, std::size_t> index;
  std::vector<Group> groups;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    auto [it, inserted] = index.emplace(keys[i], groups.size());
    if (inserted) groups.push_back(Group{std::move(keys[i]), {}});
    groups[it->second].rows.push_back(i);
  }
  return groups;
}

// Predictions for rows of `x` where group g uses adapter `make_adapter(g)`.
template <class MakeAdapter>
std::vector<int> predict_groups(const Backbone& backbone, const DenseArray& x, const std::vector<Group>& groups,
                                std::size_t workers, MakeAdapter&& make_adapter) {
  std::vector<int> preds(x.rows(), -1);
  parallel_for(groups.size(), workers, [&](std::size_t g) {
    const ParameterBundle adapter = make_adapter(groups[g]);
    const auto labels = argmax_rows(backbone.logits(gather_rows(x, groups[g].rows), adapter));
    for (std::size_t i = 0; i < groups[g].rows.size(); ++i) preds[groups[g].rows[i]] = labels[i];
  });
  return preds;
}

}  // namespace

std::vector<int> predict_split(const Composer& composer, const DomainDataset& dataset, Split split, int identity,
                               const EvalOptions& options) {
  const DenseArray x = dataset.features(split);
  const auto strategy = composer.config().strategy;
  std::vector<ProbabilityVector> keys(x.rows());
  if (strategy == Strategy::DynamicMerge || strategy == Strategy::ArgmaxSelect) {
    const DenseArray feats = composer.backbone().features(x);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      auto p = topk_renormalize(route(feats.row(i), composer.router()), composer.effective_top_k());
      if (strategy == Strategy::ArgmaxSelect) {
        const auto best = argmax(p);
        std::fill(p.begin(), p.end(), 0.0);
        p[best] = 1.0;
      }
      keys[i] = std::move(p);
    }
  }
  const auto groups = group_by(std::move(keys));
  return predict_groups(composer.backbone(), x, groups, options.workers,
                        [&](const Group& g) { return composer.compose(g.p, identity); });
}

double evaluate_accuracy(const Composer& composer, const DomainDataset& dataset, Split split, int identity,
                         const EvalOptions& options) {
  const auto preds = predict_split(composer, dataset, split, identity, options);
  return accuracy(preds, dataset.labels(split));
}

double evaluate_fixed(const Backbone& backbone, const ParameterBundle* adapter, const DomainDataset& dataset,
                      Split split) {
  const DenseArray x = dataset.features(split);
  const auto preds = argmax_rows(adapter ? backbone.logits(x, *adapter) : backbone.logits(x));
  return accuracy(preds, dataset.labels(split));
}

std::vector<double> evaluate_row(const Composer& composer, std::span<const DomainDataset> datasets,
                                 const EvalOptions& options) {
  if (datasets.size() != composer.bank().size()) {
    throw ContractError("evaluate_row: " + std::to_string(datasets.size()) + " datasets for a bank of " +
                        std::to_string(composer.bank().size()));
  }
  std::vector<double> row;
  for (std::size_t t = 0; t < datasets.size(); ++t) {
    row.push_back(evaluate_accuracy(composer, datasets[t], Split::Test, static_cast<int>(t), options));
  }
  return row;
}

ScoreMatrix prefix_score_matrix(const Backbone& backbone, const AdapterBank& bank, const RouterState& router,
                                std::span<const GramStats> grams, std::span<const DomainDataset> datasets,
                                const ComposerConfig& config, const EvalOptions& options) {
  if (datasets.size() != bank.size()) throw ContractError("prefix_score_matrix: dataset count differs from bank size");
  ScoreMatrix scores;
  for (std::size_t t = 1; t <= bank.size(); ++t) {
    const AdapterBank sub_bank = bank.prefix(t);
    const RouterState sub_router = router.prefix(t);
    const auto sub_grams = grams.empty() ? std::span<const GramStats>{} : grams.subspan(0, t);
    const Composer composer(backbone, sub_bank, sub_router, config, sub_grams);
    scores.append_row(evaluate_row(composer, datasets.subspan(0, t), options));
  }
  return scores;
}

double suite_router_accuracy(const Backbone& backbone, const RouterState& router,
                             std::span<const DomainDataset> datasets) {
  std::size_t hit = 0, total = 0;
  for (std::size_t t = 0; t < datasets.size(); ++t) {
    const DenseArray feats = backbone.features(datasets[t].features(Split::Test));
    const std::vector<int> ids(feats.rows(), static_cast<int>(t));
    hit += static_cast<std::size_t>(std::llround(router_accuracy(feats, ids, router) * static_cast<double>(ids.size())));
    total += ids.size();
  }
  if (!total) throw InputError("router accuracy: no test samples");
  return static_cast<double>(hit) / static_cast<double>(total);
}

SweepResult merging_gain_sweep(const Backbone& backbone, const AdapterBank& bank,
                               std::span<const DomainDataset> datasets, std::span<const double> targets,
                               std::size_t top_k, std::uint64_t seed) {
  const std::size_t num = bank.size();
  if (num < 3) throw ContractError("merging_gain_sweep: needs a bank of at least 3 adapters");
  if (datasets.size() != num) throw ContractError("merging_gain_sweep: dataset count differs from bank size");
  const std::size_t k = std::min(top_k, num);

  std::vector<DenseArray> parts;
  std::vector<int> ids, labels;
  for (std::size_t t = 0; t < num; ++t) {
    const auto& ds = datasets[t];
    for (auto i : ds.test) {
      parts.push_back(ds.samples[i].features);
      ids.push_back(static_cast<int>(t));
      labels.push_back(ds.samples[i].label);
    }
  }
  const DenseArray x = stack_rows(parts);

  SweepResult result;
  {
    std::size_t hit = 0;
    for (std::size_t t = 0; t < num; ++t) {
      const auto& ds = datasets[t];
      hit += static_cast<std::size_t>(std::llround(evaluate_fixed(backbone, &bank[t], ds, Split::Test) *
                                                   static_cast<double>(ds.test.size())));
    }
    result.upper_bound_accuracy = static_cast<double>(hit) / static_cast<double>(labels.size());
  }

  std::vector<double> measured, gains;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    const auto probs = degrade_router(ids, targets[r], num, seed + r);
    std::vector<ProbabilityVector> merged_keys, argmax_keys;
    std::size_t routed_right = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const auto best = argmax(probs[i]);
      routed_right += static_cast<int>(best) == ids[i];
      merged_keys.push_back(topk_renormalize(probs[i], k));
      ProbabilityVector one_hot(num, 0.0);
      one_hot[best] = 1.0;
      argmax_keys.push_back(std::move(one_hot));
    }
    const auto merged_preds = predict_groups(backbone, x, group_by(std::move(merged_keys)), 1,
                                             [&](const Group& g) { return dynamic_merge(bank, g.p); });
    const auto argmax_preds = predict_groups(backbone, x, group_by(std::move(argmax_keys)), 1,
                                             [&](const Group& g) { return argmax_select(bank, g.p); });
    SweepRow row;
    row.target_accuracy = targets[r];
    row.router_accuracy = static_cast<double>(routed_right) / static_cast<double>(ids.size());
    row.merged_accuracy = accuracy(merged_preds, labels);
    row.argmax_accuracy = accuracy(argmax_preds, labels);
    row.gain = row.merged_accuracy - row.argmax_accuracy;
    row.gain_over_argmax = row.argmax_accuracy > 0.0 ? row.gain / row.argmax_accuracy : 0.0;
    row.gain_over_upper_bound = result.upper_bound_accuracy > 0.0 ? row.gain / result.upper_bound_accuracy : 0.0;
    measured.push_back(row.router_accuracy);
    gains.push_back(row.gain);
    result.rows.push_back(row);
  }
  result.rank_correlation = spearman(measured, gains);
  return result;
}

}  // namespace dam
