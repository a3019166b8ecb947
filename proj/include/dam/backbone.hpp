// SPDX-License-Identifier: Apache-2.0
//
// Small residual MLP-mixer style encoder with an adapter slot after every
// mixing and every feedforward sublayer:
//
//   h = x We + be
//   per block:  h = h + gelu(h Wm + bm);           h = adapter(h)
//               h = h + gelu(h W1 + b1) W2 + b2;   h = adapter(h)
//   logits = h Wh + bh
//
// Adapter layer: y = x + gelu(x Wdown + bdown) Wup + bup.
// Router features are the final hidden state computed without adapters.
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dam/autograd.hpp"
#include "dam/data.hpp"
#include "dam/parameter_bundle.hpp"

namespace dam {

struct AdapterConfig {
  std::size_t downsample_factor = 8;
};

struct BackboneConfig {
  std::size_t input_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t num_blocks = 2;
  std::size_t vocab_size = 16;
  AdapterConfig adapter;

  std::size_t ff_dim() const noexcept { return 2 * hidden_dim; }
  std::size_t adapter_dim() const noexcept { return hidden_dim / adapter.downsample_factor; }
  // Two adapter layers per block.
  std::size_t num_adapter_layers() const noexcept { return 2 * num_blocks; }
  void validate() const;

  friend bool operator==(const BackboneConfig& a, const BackboneConfig& b) {
    return a.input_dim == b.input_dim && a.hidden_dim == b.hidden_dim && a.num_blocks == b.num_blocks &&
           a.vocab_size == b.vocab_size && a.adapter.downsample_factor == b.adapter.downsample_factor;
  }
};

struct AdapterLayerWeights {
  DenseArray down_proj;  // [d x d/r]
  DenseArray down_bias;  // [d/r]
  DenseArray up_proj;    // [d/r x d]
  DenseArray up_bias;    // [d]
};

std::string adapter_key(std::size_t layer, const char* field);
std::vector<AdapterLayerWeights> adapter_layers(const ParameterBundle& adapter, const BackboneConfig& config);
ParameterBundle adapter_bundle(std::span<const AdapterLayerWeights> layers);
// Names of the adapter's linear weight matrices (RegMean targets).
std::vector<std::string> adapter_linear_names(const BackboneConfig& config);

// Down-projections small random, up-projections zero: the adapter starts as
// the identity map.
ParameterBundle init_adapter(const BackboneConfig& config, std::uint64_t seed);
ParameterBundle init_backbone_weights(const BackboneConfig& config, std::uint64_t seed);

// Per linear-layer input Gram matrices X^T X, keyed by adapter weight name.
using GramStats = std::map<std::string, DenseArray>;

class Backbone {
 public:
  Backbone(BackboneConfig config, ParameterBundle weights);

  const BackboneConfig& config() const noexcept { return config_; }
  const ParameterBundle& weights() const noexcept { return weights_; }

  // x is [input_dim] or [n x input_dim]; result keeps the rank.
  DenseArray features(const DenseArray& x) const;
  DenseArray logits(const DenseArray& x) const;
  DenseArray logits(const DenseArray& x, const ParameterBundle& adapter) const;
  DenseArray logits(const DenseArray& x, std::span<const AdapterLayerWeights> layers) const;

  // Records the forward pass on `tape`. When `adapter` is null the adapter
  // slots are skipped. `grams`, when given, accumulates adapter-input Gram
  // matrices for the batch.
  // `hidden`, when given, receives the pre-head hidden state.
  Var record(GradientTape& tape, Var x, bool train_backbone, const ParameterBundle* adapter, bool train_adapter,
             GramStats* grams = nullptr, Var* hidden = nullptr) const;

  void check_adapter(const ParameterBundle& adapter) const;

  // Same forward over caller-owned weights (used while pretraining).
  static Var record_with(const BackboneConfig& config, const ParameterBundle& weights, GradientTape& tape, Var x,
                         bool train_backbone, const ParameterBundle* adapter, bool train_adapter,
                         GramStats* grams = nullptr, Var* hidden = nullptr);

 private:
  BackboneConfig config_;
  ParameterBundle weights_;
  ShapeSignature adapter_signature_;
};

struct PretrainConfig {
  std::size_t epochs = 25;
  std::size_t warmup_epochs = 2;
  double learning_rate = 3e-3;
  std::size_t batch_size = 64;
};

// Trains every backbone weight on the mixture's train split. Deterministic
// given the seed.
Backbone pretrain_backbone(const DomainDataset& mixture, const BackboneConfig& config, std::uint64_t seed,
                           const PretrainConfig& pretrain = {});

std::vector<int> argmax_rows(const DenseArray& logits);
double accuracy(std::span<const int> predicted, std::span<const int> truth);

}  // namespace dam
