// SPDX-License-Identifier: Apache-2.0
#include "dam/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dam/error.hpp"
#include "dam/optimizer.hpp"

namespace dam {

void BackboneConfig::validate() const {
  if (!input_dim || !hidden_dim || !num_blocks || !vocab_size || !adapter.downsample_factor) {
    throw ConfigError("backbone: all dimensions must be positive");
  }
  if (hidden_dim % adapter.downsample_factor != 0) {
    throw ConfigError("backbone: hidden_dim must be divisible by the adapter downsample factor");
  }
}

std::string adapter_key(std::size_t layer, const char* field) {
  return "adapter" + std::to_string(layer) + "." + field;
}

std::vector<std::string> adapter_linear_names(const BackboneConfig& config) {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < config.num_adapter_layers(); ++l) {
    names.push_back(adapter_key(l, "down_proj"));
    names.push_back(adapter_key(l, "up_proj"));
  }
  return names;
}

std::vector<AdapterLayerWeights> adapter_layers(const ParameterBundle& adapter, const BackboneConfig& config) {
  std::vector<AdapterLayerWeights> layers;
  for (std::size_t l = 0; l < config.num_adapter_layers(); ++l) {
    layers.push_back({adapter.get(adapter_key(l, "down_proj")), adapter.get(adapter_key(l, "down_bias")),
                      adapter.get(adapter_key(l, "up_proj")), adapter.get(adapter_key(l, "up_bias"))});
  }
  return layers;
}

ParameterBundle adapter_bundle(std::span<const AdapterLayerWeights> layers) {
  ParameterBundle b;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    b.insert(adapter_key(l, "down_proj"), layers[l].down_proj);
    b.insert(adapter_key(l, "down_bias"), layers[l].down_bias);
    b.insert(adapter_key(l, "up_proj"), layers[l].up_proj);
    b.insert(adapter_key(l, "up_bias"), layers[l].up_bias);
  }
  return b;
}

namespace {

DenseArray gaussian(std::mt19937_64& rng, std::vector<std::size_t> shape, double stddev) {
  std::normal_distribution<double> normal(0.0, stddev);
  DenseArray a(std::move(shape));
  for (auto& v : a.data()) v = static_cast<float>(normal(rng));
  return a;
}

std::string block_key(std::size_t block, const char* field) {
  return "block" + std::to_string(block) + "." + field;
}

}  // namespace

ParameterBundle init_adapter(const BackboneConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed ^ 0xA5A5A5A5ULL);
  const std::size_t d = config.hidden_dim, r = config.adapter_dim();
  const double stddev = 1.0 / std::sqrt(static_cast<double>(d));
  ParameterBundle b;
  for (std::size_t l = 0; l < config.num_adapter_layers(); ++l) {
    b.insert(adapter_key(l, "down_proj"), gaussian(rng, {d, r}, stddev));
    b.insert(adapter_key(l, "down_bias"), DenseArray::zeros({r}));
    b.insert(adapter_key(l, "up_proj"), DenseArray::zeros({r, d}));
    b.insert(adapter_key(l, "up_bias"), DenseArray::zeros({d}));
  }
  return b;
}

ParameterBundle init_backbone_weights(const BackboneConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  const std::size_t in = config.input_dim, d = config.hidden_dim, ff = config.ff_dim(), v = config.vocab_size;
  auto fan = [](std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); };
  ParameterBundle b;
  b.insert("embed.weight", gaussian(rng, {in, d}, fan(in)));
  b.insert("embed.bias", DenseArray::zeros({d}));
  for (std::size_t k = 0; k < config.num_blocks; ++k) {
    b.insert(block_key(k, "mix.weight"), gaussian(rng, {d, d}, fan(d)));
    b.insert(block_key(k, "mix.bias"), DenseArray::zeros({d}));
    b.insert(block_key(k, "ff1.weight"), gaussian(rng, {d, ff}, fan(d)));
    b.insert(block_key(k, "ff1.bias"), DenseArray::zeros({ff}));
    b.insert(block_key(k, "ff2.weight"), gaussian(rng, {ff, d}, fan(ff)));
    b.insert(block_key(k, "ff2.bias"), DenseArray::zeros({d}));
  }
  b.insert("head.weight", gaussian(rng, {d, v}, fan(d)));
  b.insert("head.bias", DenseArray::zeros({v}));
  return b;
}

Backbone::Backbone(BackboneConfig config, ParameterBundle weights)
    : config_(config), weights_(std::move(weights)) {
  config_.validate();
  const auto expected = init_backbone_weights(config_, 0).shape_signature();
  if (weights_.shape_signature() != expected) {
    throw ContractError("Backbone: weights do not match the configured architecture");
  }
  adapter_signature_ = init_adapter(config_, 0).shape_signature();
}

void Backbone::check_adapter(const ParameterBundle& adapter) const {
  const auto& expected = adapter_signature_;
  if (adapter.size() != expected.size()) {
    throw ContractError("adapter has " + std::to_string(adapter.size() / 4) + " layers, expected " +
                        std::to_string(config_.num_adapter_layers()));
  }
  if (adapter.shape_signature() != expected) {
    throw ContractError("adapter shapes do not match the configured architecture");
  }
}

namespace {
void accumulate_gram(GramStats& grams, const std::string& key, const DenseArray& x) {
  DenseArray g = matmul(transpose(x), x);
  auto it = grams.find(key);
  if (it == grams.end()) {
    grams.emplace(key, std::move(g));
  } else {
    it->second = add(it->second, g);
  }
}
}  // namespace

Var Backbone::record(GradientTape& tape, Var x, bool train_backbone, const ParameterBundle* adapter,
                     bool train_adapter, GramStats* grams, Var* hidden) const {
  if (adapter) check_adapter(*adapter);
  return record_with(config_, weights_, tape, x, train_backbone, adapter, train_adapter, grams, hidden);
}

Var Backbone::record_with(const BackboneConfig& config, const ParameterBundle& weights, GradientTape& tape, Var x,
                          bool train_backbone, const ParameterBundle* adapter, bool train_adapter, GramStats* grams,
                          Var* hidden) {
  if (tape.value(x).rank() != 2 || tape.value(x).cols() != config.input_dim) {
    throw InputError("sample dimension " + shape_string(tape.value(x).shape()) + " does not match input_dim " +
                     std::to_string(config.input_dim));
  }

  auto theta = [&](const std::string& name) {
    return train_backbone ? tape.parameter(name, weights.get(name)) : tape.constant(weights.get(name));
  };
  auto adapter_slot = [&](Var h, std::size_t layer) {
    if (!adapter) return h;
    auto w = [&](const char* field) {
      const auto key = adapter_key(layer, field);
      return train_adapter ? tape.parameter(key, adapter->get(key)) : tape.constant(adapter->get(key));
    };
    if (grams) accumulate_gram(*grams, adapter_key(layer, "down_proj"), tape.value(h));
    Var down = tape.gelu(tape.add_bias(tape.matmul(h, w("down_proj")), w("down_bias")));
    if (grams) accumulate_gram(*grams, adapter_key(layer, "up_proj"), tape.value(down));
    Var up = tape.add_bias(tape.matmul(down, w("up_proj")), w("up_bias"));
    return tape.add(h, up);
  };

  Var h = tape.add_bias(tape.matmul(x, theta("embed.weight")), theta("embed.bias"));
  for (std::size_t k = 0; k < config.num_blocks; ++k) {
    Var mix = tape.gelu(tape.add_bias(tape.matmul(h, theta(block_key(k, "mix.weight"))), theta(block_key(k, "mix.bias"))));
    h = adapter_slot(tape.add(h, mix), 2 * k);
    Var ff = tape.gelu(tape.add_bias(tape.matmul(h, theta(block_key(k, "ff1.weight"))), theta(block_key(k, "ff1.bias"))));
    ff = tape.add_bias(tape.matmul(ff, theta(block_key(k, "ff2.weight"))), theta(block_key(k, "ff2.bias")));
    h = adapter_slot(tape.add(h, ff), 2 * k + 1);
  }
  if (hidden) *hidden = h;
  return tape.add_bias(tape.matmul(h, theta("head.weight")), theta("head.bias"));
}

namespace {
DenseArray as_batch(const DenseArray& x) {
  if (x.rank() == 1) return x.reshaped({1, x.size()});
  return x;
}
DenseArray restore_rank(const DenseArray& out, const DenseArray& x) {
  if (x.rank() == 1) return out.reshaped({out.size()});
  return out;
}
}  // namespace

DenseArray Backbone::features(const DenseArray& x) const {
  GradientTape tape;
  Var hidden;
  record(tape, tape.constant(as_batch(x)), false, nullptr, false, nullptr, &hidden);
  return restore_rank(tape.value(hidden), x);
}

DenseArray Backbone::logits(const DenseArray& x) const {
  GradientTape tape;
  Var out = record(tape, tape.constant(as_batch(x)), false, nullptr, false);
  return restore_rank(tape.value(out), x);
}

DenseArray Backbone::logits(const DenseArray& x, const ParameterBundle& adapter) const {
  GradientTape tape;
  Var out = record(tape, tape.constant(as_batch(x)), false, &adapter, false);
  return restore_rank(tape.value(out), x);
}

DenseArray Backbone::logits(const DenseArray& x, std::span<const AdapterLayerWeights> layers) const {
  if (layers.size() != config_.num_adapter_layers()) {
    throw ContractError("forward_with_adapter: got " + std::to_string(layers.size()) + " adapter layers, expected " +
                        std::to_string(config_.num_adapter_layers()));
  }
  return logits(x, adapter_bundle(layers));
}

std::vector<int> argmax_rows(const DenseArray& logits) {
  const DenseArray m = logits.rank() == 1 ? logits.reshaped({1, logits.size()}) : logits;
  std::vector<int> out;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < m.cols(); ++j)
      if (m.at(i, j) > m.at(i, best)) best = j;
    out.push_back(static_cast<int>(best));
  }
  return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw ContractError("accuracy: length mismatch");
  if (predicted.empty()) throw InputError("accuracy: no samples");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hit += predicted[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(predicted.size());
}

Backbone pretrain_backbone(const DomainDataset& mixture, const BackboneConfig& config, std::uint64_t seed,
                           const PretrainConfig& pretrain) {
  if (mixture.samples.empty() || mixture.train.empty()) throw InputError("pretrain_backbone: empty mixture");
  config.validate();
  mixture.validate(config.vocab_size);
  if (mixture.input_dim() != config.input_dim) throw InputError("pretrain_backbone: mixture input_dim mismatch");

  ParameterBundle weights = init_backbone_weights(config, seed);
  const std::size_t n = mixture.train.size();
  const std::size_t batch = std::min(pretrain.batch_size, n);
  const std::size_t steps_per_epoch = (n + batch - 1) / batch;
  LinearSchedule schedule{pretrain.learning_rate, pretrain.warmup_epochs * steps_per_epoch,
                          pretrain.epochs * steps_per_epoch};
  AdamOptimizer opt(weights, all_names(weights), schedule);

  std::mt19937_64 rng(seed + 17);
  std::vector<std::size_t> order = mixture.train;
  for (std::size_t epoch = 0; epoch < pretrain.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      std::vector<float> xs;
      std::vector<int> ys;
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = mixture.samples[order[i]];
        xs.insert(xs.end(), s.features.values().begin(), s.features.values().end());
        ys.push_back(s.label);
      }
      GradientTape tape;
      Var x = tape.constant(DenseArray({end - start, config.input_dim}, std::move(xs)));
      Var loss = tape.softmax_cross_entropy(Backbone::record_with(config, weights, tape, x, true, nullptr, false), ys);
      opt.step(weights, tape.backward(loss));
    }
  }
  return Backbone(config, std::move(weights));
}

}  // namespace dam
