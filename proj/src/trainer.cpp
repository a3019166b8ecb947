// SPDX-License-Identifier: Apache-2.0
#include "dam/trainer.hpp"

#include <algorithm>
#include <random>

#include "dam/error.hpp"
#include "dam/optimizer.hpp"

namespace dam {

const char* init_mode_name(InitMode m) { return m == InitMode::Continual ? "continual" : "random"; }

InitMode parse_init_mode(const std::string& name) {
  if (name == "continual") return InitMode::Continual;
  if (name == "random") return InitMode::Random;
  throw ConfigError("unknown init_mode '" + name + "' (expected continual or random)");
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("train.epochs must be positive");
  if (warmup_epochs > epochs) throw ConfigError("train.warmup_epochs must not exceed train.epochs");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
}

std::uint64_t stage_seed(std::uint64_t seed, std::size_t stage) {
  return seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL * (stage + 1);
}

ParameterBundle continual_initialize(const AdapterBank& bank, InitMode mode, const BackboneConfig& config,
                                     std::uint64_t seed) {
  if (mode == InitMode::Continual && !bank.empty()) return bank[bank.size() - 1];
  return init_adapter(config, seed);
}

double split_loss(const Backbone& backbone, const ParameterBundle* adapter, const DomainDataset& dataset,
                  Split split) {
  GradientTape tape;
  Var x = tape.constant(dataset.features(split));
  Var loss = tape.softmax_cross_entropy(backbone.record(tape, x, false, adapter, false), dataset.labels(split));
  return tape.value(loss)[0];
}

void train_adapter(const Backbone& backbone, ParameterBundle& adapter, const DomainDataset& dataset,
                   const TrainConfig& config, std::uint64_t seed) {
  config.validate();
  backbone.check_adapter(adapter);
  if (dataset.train.empty()) throw InputError("dataset '" + dataset.name + "' has an empty train split");

  const std::size_t n = dataset.train.size();
  const std::size_t batch = std::min(config.batch_size, n);
  const std::size_t steps_per_epoch = (n + batch - 1) / batch;
  LinearSchedule schedule{config.learning_rate, config.warmup_epochs * steps_per_epoch,
                          config.epochs * steps_per_epoch};
  AdamOptimizer opt(adapter, all_names(adapter), schedule);
  const std::size_t dim = backbone.config().input_dim;

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order = dataset.train;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      std::vector<float> xs;
      xs.reserve((end - start) * dim);
      std::vector<int> ys;
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = dataset.samples[order[i]];
        xs.insert(xs.end(), s.features.values().begin(), s.features.values().end());
        ys.push_back(s.label);
      }
      GradientTape tape;
      Var x = tape.constant(DenseArray({end - start, dim}, std::move(xs)));
      Var loss = tape.softmax_cross_entropy(backbone.record(tape, x, false, &adapter, true), ys);
      opt.step(adapter, tape.backward(loss));
    }
  }
}

GramStats collect_grams(const Backbone& backbone, const ParameterBundle& adapter, const DomainDataset& dataset) {
  GradientTape tape;
  GramStats grams;
  backbone.record(tape, tape.constant(dataset.features(Split::Train)), false, &adapter, false, &grams);
  return grams;
}

TrainerState train_stage(const Backbone& backbone, const DomainDataset& dataset, TrainerState state,
                         const TrainConfig& config) {
  if (dataset.train.empty()) throw InputError("dataset '" + dataset.name + "' has an empty train split");
  if (dataset.input_dim() != backbone.config().input_dim) {
    throw InputError("dataset '" + dataset.name + "' has input_dim " + std::to_string(dataset.input_dim()) +
                     ", backbone expects " + std::to_string(backbone.config().input_dim));
  }
  dataset.validate(backbone.config().vocab_size);

  const std::uint64_t backbone_sum = backbone.weights().checksum();
  std::vector<std::uint64_t> bank_sums;
  for (const auto& a : state.bank.bundles()) bank_sums.push_back(a.checksum());

  const std::uint64_t seed = stage_seed(config.seed, state.stage);
  ParameterBundle adapter = continual_initialize(state.bank, config.init_mode, backbone.config(), seed);
  const double before = split_loss(backbone, &adapter, dataset, Split::Train);
  train_adapter(backbone, adapter, dataset, config, seed);
  const double after = split_loss(backbone, &adapter, dataset, Split::Train);

  if (backbone.weights().checksum() != backbone_sum) throw ContractError("train_stage: backbone weights changed");
  for (std::size_t i = 0; i < bank_sums.size(); ++i) {
    if (state.bank[i].checksum() != bank_sums[i]) {
      throw ContractError("train_stage: adapter " + std::to_string(i + 1) + " changed");
    }
  }

  state.grams.push_back(collect_grams(backbone, adapter, dataset));
  state.bank.append(std::move(adapter));
  state.router.add(fit_centroid(dataset, backbone), dataset.train.size());
  state.dataset_names.push_back(dataset.name);
  state.stage_losses.emplace_back(before, after);
  ++state.stage;
  return state;
}

TrainerState run_sequence(const Backbone& backbone, std::span<const DomainDataset> datasets, const TrainConfig& config,
                          const ComposerConfig& composer, TrainerState initial, const StageCallback& on_stage,
                          const EvalOptions& options) {
  if (datasets.empty()) throw InputError("run_sequence: no datasets");
  if (initial.stage > datasets.size()) throw ContractError("run_sequence: resume state is past the last dataset");
  if (initial.scores.stages() != initial.stage || initial.bank.size() != initial.stage) {
    throw ContractError("run_sequence: inconsistent resume state");
  }
  config.validate();
  TrainerState state = std::move(initial);
  while (state.stage < datasets.size()) {
    state = train_stage(backbone, datasets[state.stage], std::move(state), config);
    const Composer comp(backbone, state.bank, state.router, composer, state.grams);
    state.scores.append_row(evaluate_row(comp, datasets.subspan(0, state.stage), options));
    if (on_stage) on_stage(state);
  }
  return state;
}

BaselineRun run_seq_ft(const Backbone& backbone, std::span<const DomainDataset> datasets, const TrainConfig& config) {
  if (datasets.empty()) throw InputError("run_seq_ft: no datasets");
  BaselineRun run;
  run.adapter = init_adapter(backbone.config(), stage_seed(config.seed, 0));
  for (std::size_t t = 0; t < datasets.size(); ++t) {
    train_adapter(backbone, run.adapter, datasets[t], config, stage_seed(config.seed, t));
    std::vector<double> row;
    for (std::size_t tau = 0; tau <= t; ++tau) row.push_back(evaluate_fixed(backbone, &run.adapter, datasets[tau], Split::Test));
    run.scores.append_row(std::move(row));
  }
  run.final_accuracies = run.scores.row(datasets.size());
  return run;
}

BaselineRun run_multitask(const Backbone& backbone, std::span<const DomainDataset> datasets,
                          const TrainConfig& config) {
  if (datasets.empty()) throw InputError("run_multitask: no datasets");
  const DomainDataset joint = concatenate(datasets, "multitask");
  BaselineRun run;
  run.adapter = init_adapter(backbone.config(), stage_seed(config.seed, 0));
  train_adapter(backbone, run.adapter, joint, config, stage_seed(config.seed, 0));
  for (const auto& ds : datasets) run.final_accuracies.push_back(evaluate_fixed(backbone, &run.adapter, ds, Split::Test));
  return run;
}

BaselineRun run_zero_shot(const Backbone& backbone, std::span<const DomainDataset> datasets) {
  if (datasets.empty()) throw InputError("run_zero_shot: no datasets");
  BaselineRun run;
  for (const auto& ds : datasets) run.final_accuracies.push_back(evaluate_fixed(backbone, nullptr, ds, Split::Test));
  for (std::size_t t = 1; t <= datasets.size(); ++t) {
    run.scores.append_row(std::vector<double>(run.final_accuracies.begin(), run.final_accuracies.begin() + t));
  }
  run.adapter = init_adapter(backbone.config(), 0);
  return run;
}

}  // namespace dam
