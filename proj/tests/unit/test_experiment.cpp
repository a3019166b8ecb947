// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dam/error.hpp"
#include "dam/experiment.hpp"
#include "support.hpp"

using namespace dam;
using nlohmann::json;

namespace {

json small_config(const std::filesystem::path& out) {
  return {{"suite", {{"name", "large_gap"}, {"num_domains", 3}, {"samples_per_domain", 150}}},
          {"seed", 1},
          {"pretrain", {{"epochs", 2}}},
          {"train", {{"epochs", 3}, {"warmup_epochs", 1}}},
          {"baselines",
           {{"zero_shot", false},
            {"seq_ft", false},
            {"multitask", false},
            {"argmax_select", false},
            {"static_average", false},
            {"static_regmean", false},
            {"oracle_identity", false}}},
          {"out_dir", out.string()}};
}

// One trained run shared by the command tests.
const std::filesystem::path& trained_run() {
  static const std::filesystem::path dir = [] {
    const auto d = testing::scratch_dir("experiment_run");
    std::ostringstream log;
    cmd_train(config_from_json(small_config(d)), false, log);
    return d;
  }();
  return dir;
}

std::string config_error(const json& j) {
  try {
    config_from_json(j).validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("configuration errors name the field") {
  CHECK(config_error({{"suite", {{"name", "large_gap"}}}, {"train", {{"epochs", -1}}}}).find("train.epochs") !=
        std::string::npos);
  CHECK(config_error({{"suite", {{"name", "large_gap"}}}, {"colour", 1}}).find("colour") != std::string::npos);
  CHECK(config_error({{"suite", {{"name", "large_gap"}, {"gap", 1}}}}).find("suite.gap") != std::string::npos);
  CHECK(config_error({{"suite", {{"name", "nope"}}}}).find("suite.name") != std::string::npos);
  CHECK(config_error({{"seed", 0}}).find("exactly one") != std::string::npos);
  CHECK(config_error({{"suite", {{"name", "large_gap"}}}, {"order", {0, 0, 1, 2}}}).find("order") != std::string::npos);
  CHECK(config_error({{"suite", {{"name", "large_gap"}}}, {"composer", {{"top_k", 0}}}}).find("top_k") !=
        std::string::npos);

  auto missing = ExperimentConfig{};
  missing.data_paths = {"/definitely/not/here.jsonl"};
  try {
    missing.validate();
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("/definitely/not/here.jsonl") != std::string::npos);
  }
}

TEST_CASE("configuration hash ignores output location and workers") {
  auto a = config_from_json(small_config("/tmp/a"));
  auto b = config_from_json(small_config("/tmp/b"));
  b.workers = 4;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.seed = 2;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(config_from_json(config_to_json(a))) == config_hash(a));
}

TEST_CASE("grid deduplication") {
  bool dup = false;
  CHECK(dedupe_grid({0.5, 0.0, 0.5, 1.0}, &dup) == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(dup);
  CHECK(dedupe_grid({1.0}, &dup) == std::vector<double>{1.0});
  CHECK_FALSE(dup);
}

TEST_CASE("published row renders with one decimal") {
  const std::string table = cmd_report(DAM_FIXTURE_DIR "/published_row");
  CHECK(table.find("50.2 (-2.3)") != std::string::npos);
  for (const char* v : {"39.1", "53.6", "42.2", "63.0", "36.3", "66.8", "iVQA", "TGIF"})
    CHECK(table.find(v) != std::string::npos);
}

TEST_CASE("tampered report averages are rejected") {
  json j = {{"strategy", "x"}, {"per_dataset", {0.5, 0.7}}, {"average_accuracy", 0.7}};
  CHECK_THROWS_AS(report_from_json(j), SchemaError);
  j["average_accuracy"] = 0.6;
  CHECK(report_from_json(j).average_accuracy == doctest::Approx(0.6));
}

TEST_CASE("missing report is an input error") {
  const auto dir = testing::scratch_dir("empty_report");
  try {
    cmd_report(dir);
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("report.json") != std::string::npos);
  }
}

TEST_CASE("train writes the documented artifacts") {
  const auto& dir = trained_run();
  for (const char* f : {"score_matrix.json", "report.json", "checkpoint/manifest.json", "stages/stage_1/manifest.json",
                        "stages/stage_3/tensors.bin"})
    CHECK(std::filesystem::exists(dir / f));
  const auto sm = json::parse(read_file(dir / "score_matrix.json"));
  CHECK(sm.at("scores").size() == 3);
  CHECK(sm.at("seed") == 1);
  CHECK(cmd_report(dir).find("dynamic_merge") != std::string::npos);
}

TEST_CASE("argmax selection and merging with k = 1 evaluate identically") {
  std::ostringstream log;
  EvalRequest r;
  r.checkpoint = trained_run() / "checkpoint";
  r.out = testing::scratch_dir("eval_out");
  r.strategy = Strategy::ArgmaxSelect;
  const auto sel = cmd_eval(r, log);
  r.strategy = Strategy::DynamicMerge;
  r.top_k = 1;
  const auto one = cmd_eval(r, log);
  CHECK(sel.per_dataset == one.per_dataset);
  CHECK(std::filesystem::exists(*r.out / "eval_dynamic_merge_k1.json"));

  r.top_k.reset();
  r.oracle_identity = true;
  const auto oracle = cmd_eval(r, log);
  r.oracle_identity = false;
  const auto dil = cmd_eval(r, log);
  CHECK(oracle.average_accuracy >= dil.average_accuracy);
}

TEST_CASE("sweep edge cases") {
  std::ostringstream log, warn;
  SweepRequest r;
  r.checkpoint = trained_run() / "checkpoint";
  r.out = testing::scratch_dir("sweep_out");
  r.grid = {1.0};
  const auto single = cmd_sweep(r, log, warn);
  CHECK(single.rows.size() == 1);
  CHECK(warn.str().empty());

  r.grid = {0.0, 1.0, 1.0};
  const auto deduped = cmd_sweep(r, log, warn);
  CHECK(deduped.rows.size() == 2);
  CHECK(warn.str().find("duplicate") != std::string::npos);
  CHECK(std::filesystem::exists(*r.out / "sweep.tsv"));

  r.grid = {1.5};
  CHECK_THROWS_AS(cmd_sweep(r, log, warn), InputError);
}

TEST_CASE("sweeps need at least three adapters") {
  std::ostringstream log, warn;
  SweepRequest r;
  r.checkpoint = trained_run() / "stages" / "stage_2";
  r.out = testing::scratch_dir("sweep_short");
  CHECK_THROWS_AS(cmd_sweep(r, log, warn), ContractError);
}

TEST_CASE("resuming reproduces the uninterrupted run") {
  const auto dir = testing::scratch_dir("experiment_resume");
  std::filesystem::copy(trained_run(), dir, std::filesystem::copy_options::recursive);
  std::filesystem::remove_all(dir / "stages" / "stage_3");
  std::filesystem::remove_all(dir / "checkpoint");
  std::ostringstream log;
  cmd_train(config_from_json(small_config(dir)), true, log);
  CHECK(log.str().find("resum") != std::string::npos);
  CHECK(read_file(dir / "score_matrix.json") == read_file(trained_run() / "score_matrix.json"));
}

TEST_CASE("command-line exit codes") {
  const std::string cli = DAM_CLI_PATH;
  const auto dir = testing::scratch_dir("cli");
  auto run = [&](const std::string& args) {
    const int status = std::system((cli + " " + args + " > " + (dir / "out.txt").string() + " 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  CHECK(run("train --config " + (dir / "nope.json").string()) == 2);
  std::ofstream(dir / "paths.json") << R"({"data_paths": ["/definitely/not/here.jsonl"]})";
  CHECK(run("train --config " + (dir / "paths.json").string()) == 2);
  CHECK(read_file(dir / "out.txt").find("/definitely/not/here.jsonl") != std::string::npos);
  CHECK(run("report " + dir.string()) == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("report " + std::string(DAM_FIXTURE_DIR) + "/published_row") == 0);
}
