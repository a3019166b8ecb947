// SPDX-License-Identifier: Apache-2.0
//
// Experiment runner behind the command-line tool: configuration, artifact
// layout and the generate / train / eval / sweep / report commands.
//
// Run directory layout written by cmd_train:
//   stages/stage_<t>/   checkpoint after stage t (resume points)
//   checkpoint/         final checkpoint
//   score_matrix.json   score matrix of the configured strategy
//   report.json         one report object per strategy and baseline
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dam/checkpoint.hpp"
#include "dam/data.hpp"
#include "dam/evaluation.hpp"
#include "dam/metrics.hpp"
#include "dam/trainer.hpp"

namespace dam {

struct Baselines {
  bool zero_shot = true;
  bool seq_ft = true;
  bool multitask = true;
  bool argmax_select = true;
  bool static_average = true;
  bool static_regmean = true;
  bool oracle_identity = true;
};

struct ExperimentConfig {
  // Exactly one data source: a generated suite or a list of record files.
  std::optional<GeneratorSpec> suite;
  // Record files are read with the backbone's input_dim and vocab_size.
  std::vector<std::filesystem::path> data_paths;
  // Optional permutation of the datasets (0-based positions).
  std::vector<std::size_t> order;
  // Record file used to pretrain the backbone when data_paths are given.
  std::optional<std::filesystem::path> pretrain_path;

  BackboneConfig backbone;
  PretrainConfig pretrain;
  TrainConfig train;
  ComposerConfig composer;
  double temperature = 0.01;
  Baselines baselines;
  std::filesystem::path out_dir = "runs/default";
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  // Throws ConfigError naming the offending field; checks that every
  // referenced path exists.
  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);
// FNV-1a of the canonical JSON of every result-affecting field (output
// directory and worker count excluded), as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

// `out` resolved against the output-root environment variable when relative.
std::filesystem::path resolve_output(const std::filesystem::path& out);
inline constexpr const char* kOutputRootVariable = "DAM_OUTPUT_ROOT";

// Datasets of the experiment in training order.
std::vector<DomainDataset> load_datasets(const ExperimentConfig& c);
Backbone build_backbone(const ExperimentConfig& c);

nlohmann::json report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);
nlohmann::json scores_to_json(const ScoreMatrix& s);

struct TrainResult {
  std::filesystem::path out_dir;
  TrainerState state;
  std::vector<MetricsReport> reports;
};

// `resume` continues from the newest stage checkpoint with a matching
// config hash, if any.
TrainResult cmd_train(const ExperimentConfig& config, bool resume, std::ostream& log);

struct EvalRequest {
  std::filesystem::path checkpoint;
  // Dataset source; defaults to the configuration stored in the checkpoint.
  std::optional<ExperimentConfig> config;
  std::optional<Strategy> strategy;
  std::optional<std::size_t> top_k;
  std::optional<double> temperature;
  bool oracle_identity = false;
  std::size_t workers = 1;
  std::optional<std::filesystem::path> out;
};
MetricsReport cmd_eval(const EvalRequest& request, std::ostream& log);

struct SweepRequest {
  std::filesystem::path checkpoint;
  std::optional<ExperimentConfig> config;
  std::vector<double> grid{0.0, 0.25, 0.5, 0.75, 1.0};
  std::optional<std::size_t> top_k;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> out;
};
SweepResult cmd_sweep(const SweepRequest& request, std::ostream& log, std::ostream& warn);

// Reads <dir>/report.json and renders the accuracy table.
std::string cmd_report(const std::filesystem::path& dir);
std::string render_table(const std::vector<std::string>& dataset_names, const std::vector<MetricsReport>& reports);

// Writes every dataset of the suite as <out>/<name>.jsonl.
std::vector<std::filesystem::path> cmd_generate(const ExperimentConfig& config, const std::filesystem::path& out);

// Sorted unique grid values; reports whether duplicates were dropped.
std::vector<double> dedupe_grid(std::vector<double> grid, bool* had_duplicates = nullptr);

}  // namespace dam
