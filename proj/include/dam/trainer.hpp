// SPDX-License-Identifier: Apache-2.0
//
// Sequential adapter training over a frozen backbone, plus the Seq-FT,
// multitask and zero-shot reference runs.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dam/backbone.hpp"
#include "dam/composer.hpp"
#include "dam/evaluation.hpp"
#include "dam/metrics.hpp"

namespace dam {

enum class InitMode { Continual, Random };

const char* init_mode_name(InitMode m);
InitMode parse_init_mode(const std::string& name);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t warmup_epochs = 3;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  InitMode init_mode = InitMode::Continual;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainerState {
  std::size_t stage = 0;  // datasets trained so far
  AdapterBank bank;
  RouterState router;
  ScoreMatrix scores;
  std::vector<GramStats> grams;  // per dataset, for the RegMean baseline
  std::vector<std::string> dataset_names;
  // Train-split loss before and after each stage's training.
  std::vector<std::pair<double, double>> stage_losses;

  friend bool operator==(const TrainerState&, const TrainerState&) = default;
};

// Initial weights for the next adapter: a copy of the newest adapter
// (continual) or a fresh identity-start adapter (random, and always for the
// first stage).
ParameterBundle continual_initialize(const AdapterBank& bank, InitMode mode, const BackboneConfig& config,
                                     std::uint64_t seed);

// Mean cross-entropy of the backbone (+ optional adapter) on a split.
double split_loss(const Backbone& backbone, const ParameterBundle* adapter, const DomainDataset& dataset, Split split);

// Trains `adapter` in place on the dataset's train split; backbone frozen.
void train_adapter(const Backbone& backbone, ParameterBundle& adapter, const DomainDataset& dataset,
                   const TrainConfig& config, std::uint64_t seed);

// Adapter-input Gram matrices over the train split.
GramStats collect_grams(const Backbone& backbone, const ParameterBundle& adapter, const DomainDataset& dataset);

// One continual stage: initialise, train, append adapter and centroid.
// Verifies that the backbone and earlier adapters are unchanged.
TrainerState train_stage(const Backbone& backbone, const DomainDataset& dataset, TrainerState state,
                         const TrainConfig& config);

using StageCallback = std::function<void(const TrainerState&)>;

// Runs the remaining stages starting from `initial` (empty state for a fresh
// run) and fills score-matrix row t after each stage with the DIL path.
TrainerState run_sequence(const Backbone& backbone, std::span<const DomainDataset> datasets, const TrainConfig& config,
                          const ComposerConfig& composer, TrainerState initial = {},
                          const StageCallback& on_stage = {}, const EvalOptions& options = {});

std::uint64_t stage_seed(std::uint64_t seed, std::size_t stage);

struct BaselineRun {
  ScoreMatrix scores;
  std::vector<double> final_accuracies;
  ParameterBundle adapter;
};

// One shared adapter fine-tuned through all stages in order.
BaselineRun run_seq_ft(const Backbone& backbone, std::span<const DomainDataset> datasets, const TrainConfig& config);
// One adapter trained jointly on the union of all train splits.
BaselineRun run_multitask(const Backbone& backbone, std::span<const DomainDataset> datasets, const TrainConfig& config);
// Backbone alone; every row equals the same accuracies.
BaselineRun run_zero_shot(const Backbone& backbone, std::span<const DomainDataset> datasets);

}  // namespace dam
