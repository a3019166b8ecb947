// SPDX-License-Identifier: Apache-2.0
//
// dam: generate suites, train adapter sequences, evaluate checkpoints, sweep
// degraded routers and render reports.
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dam/error.hpp"
#include "dam/experiment.hpp"

namespace {

dam::ExperimentConfig config_for(const std::string& config_path, const std::string& suite, std::optional<std::uint64_t> seed) {
  dam::ExperimentConfig c;
  if (!config_path.empty()) {
    c = dam::load_config(config_path);
  } else if (!suite.empty()) {
    c.suite = dam::GeneratorSpec::defaults(dam::parse_suite(suite));
  } else {
    throw dam::ConfigError("either --config or --suite is required");
  }
  if (seed) {
    c.seed = *seed;
    c.train.seed = *seed;
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic adapter merging for domain-incremental learning"};
  app.require_subcommand(1);

  std::string config_path, suite, out, strategy, checkpoint, report_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> top_k;
  std::optional<double> temperature;
  std::optional<std::size_t> workers;
  std::vector<double> grid;
  bool oracle = false, resume = false;

  auto* generate = app.add_subcommand("generate", "Write a synthetic suite as line-delimited JSON files");
  generate->add_option("--config", config_path, "Experiment configuration (JSON)");
  generate->add_option("--suite", suite, "Suite name when no config is given")
      ->check(CLI::IsMember({"large_gap", "small_gap", "pretrain_mix"}));
  generate->add_option("--seed", seed, "Generator seed");
  generate->add_option("--out", out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train adapters over the dataset sequence");
  train->add_option("--config", config_path, "Experiment configuration (JSON)")->required();
  train->add_option("--seed", seed, "Override the configured seed");
  train->add_option("--out", out, "Override the output directory");
  train->add_option("--strategy", strategy, "Composer strategy for the score matrix");
  train->add_option("--top-k", top_k, "Adapters merged per sample");
  train->add_option("--temperature", temperature, "Router softmax temperature");
  train->add_option("--workers", workers, "Evaluation threads");
  train->add_flag("--resume", resume, "Continue from the newest matching stage checkpoint");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test splits");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  eval->add_option("--config", config_path, "Dataset source (defaults to the checkpoint's configuration)");
  eval->add_option("--strategy", strategy, "dynamic_merge, argmax_select, static_average, static_regmean, oracle_identity");
  eval->add_option("--top-k", top_k, "Adapters merged per sample");
  eval->add_option("--temperature", temperature, "Router softmax temperature");
  eval->add_flag("--oracle-identity", oracle, "Use the true dataset identity (task-incremental evaluation)");
  eval->add_option("--workers", workers, "Evaluation threads");
  eval->add_option("--out", out, "Output directory");

  auto* sweep = app.add_subcommand("sweep", "Merging gain against degraded router accuracy");
  sweep->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  sweep->add_option("--config", config_path, "Dataset source (defaults to the checkpoint's configuration)");
  sweep->add_option("--accuracy-grid", grid, "Comma-separated router accuracies")->delimiter(',');
  sweep->add_option("--top-k", top_k, "Adapters merged per sample");
  sweep->add_option("--seed", seed, "Seed of the degraded routers");
  sweep->add_option("--out", out, "Output directory");

  auto* report = app.add_subcommand("report", "Render the accuracy table of a run directory");
  report->add_option("dir", report_dir, "Run directory holding report.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (generate->parsed()) {
      auto c = config_for(config_path, suite, seed);
      if (!c.suite) throw dam::ConfigError("generate needs a suite");
      if (c.suite->suite == dam::Suite::PretrainMix) {
        // pretrain_mix is not a continual suite, so write it directly.
        auto spec = *c.suite;
        spec.seed = c.seed;
        std::filesystem::create_directories(dam::resolve_output(out));
        for (const auto& ds : dam::generate_suite(spec)) {
          const auto path = dam::resolve_output(out) / (ds.name + ".jsonl");
          dam::export_jsonl(ds, path);
          std::cout << path.string() << "\n";
        }
        return 0;
      }
      for (const auto& p : dam::cmd_generate(c, dam::resolve_output(out))) std::cout << p.string() << "\n";
    } else if (train->parsed()) {
      auto c = config_for(config_path, "", seed);
      if (!out.empty()) c.out_dir = out;
      if (!strategy.empty()) c.composer.strategy = dam::parse_strategy(strategy);
      if (top_k) c.composer.top_k = *top_k;
      if (temperature) c.temperature = *temperature;
      if (workers) c.workers = *workers;
      dam::cmd_train(c, resume, std::cout);
      std::cout << dam::cmd_report(dam::resolve_output(c.out_dir));
    } else if (eval->parsed()) {
      dam::EvalRequest r;
      r.checkpoint = checkpoint;
      if (!config_path.empty()) r.config = dam::load_config(config_path);
      if (!strategy.empty()) r.strategy = dam::parse_strategy(strategy);
      r.top_k = top_k;
      r.temperature = temperature;
      r.oracle_identity = oracle;
      r.workers = workers.value_or(1);
      if (!out.empty()) r.out = out;
      dam::cmd_eval(r, std::cout);
    } else if (sweep->parsed()) {
      dam::SweepRequest r;
      r.checkpoint = checkpoint;
      if (!config_path.empty()) r.config = dam::load_config(config_path);
      if (!grid.empty()) r.grid = grid;
      r.top_k = top_k;
      r.seed = seed.value_or(0);
      if (!out.empty()) r.out = out;
      dam::cmd_sweep(r, std::cout, std::cerr);
    } else if (report->parsed()) {
      std::cout << dam::cmd_report(report_dir);
    }
  } catch (const dam::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_input_error() ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
