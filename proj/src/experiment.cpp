// SPDX-License-Identifier: Apache-2.0
#include "dam/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "dam/error.hpp"

namespace dam {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so that
// unknown keys can be reported by their full path.
class FieldReader {
 public:
  FieldReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config field '" + where_self() + "' must be an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <class T>
  void read(const char* key, T& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw type_error(key, "a boolean");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw type_error(key, "a non-negative integer");
      }
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw type_error(key, "an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw type_error(key, "a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw type_error(key, "a string");
    }
    try {
      out = v.get<T>();
    } catch (const json::exception&) {
      throw type_error(key, "a value of the documented type");
    }
  }

  FieldReader child(const char* key) {
    seen_.insert(key);
    return FieldReader(j_.at(key), where(key));
  }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown config field '" + where(item.key()) + "'");
    }
  }

 private:
  std::string where_self() const { return path_.empty() ? "<root>" : path_; }
  ConfigError type_error(const char* key, const char* expected) const {
    return ConfigError("config field '" + where(key) + "' must be " + expected);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class T>
std::vector<T> read_list(FieldReader& r, const char* key, const char* expected) {
  const json& v = r.raw(key);
  if (!v.is_array()) throw ConfigError("config field '" + r.where(key) + "' must be an array of " + expected);
  std::vector<T> out;
  for (const auto& e : v) {
    const bool ok = std::is_same_v<T, std::string> ? e.is_string() : e.is_number_unsigned() || (e.is_number_integer() && e.template get<std::int64_t>() >= 0);
    if (!ok) throw ConfigError("config field '" + r.where(key) + "' must be an array of " + expected);
    out.push_back(e.get<T>());
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_json(const fs::path& path, const json& j) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error("cannot create " + path.parent_path().string() + ": " + ec.message());
  write_file_atomic(path, j.dump(2) + "\n");
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

bool routed(Strategy s) { return s == Strategy::DynamicMerge || s == Strategy::ArgmaxSelect; }

// Position of each dataset in the experiment order.
std::size_t source_count(const ExperimentConfig& c) {
  return c.suite ? static_cast<std::size_t>(c.suite->num_domains) : c.data_paths.size();
}

GeneratorSpec aligned(GeneratorSpec spec, const ExperimentConfig& c) {
  spec.seed = c.seed;
  spec.input_dim = static_cast<int>(c.backbone.input_dim);
  spec.num_classes = static_cast<int>(c.backbone.vocab_size);
  return spec;
}

Checkpoint make_checkpoint(const Backbone& backbone, const TrainerState& state, const ExperimentConfig& c) {
  Checkpoint ck;
  ck.backbone_config = backbone.config();
  ck.backbone_weights = backbone.weights();
  ck.state = state;
  ck.composer = c.composer;
  ck.metadata = {{"config", config_to_json(c)}, {"config_hash", config_hash(c)}, {"seed", c.seed}};
  return ck;
}

ExperimentConfig config_of(const Checkpoint& ck, const std::optional<ExperimentConfig>& given) {
  if (given) return *given;
  if (!ck.metadata.contains("config")) {
    throw InputError("checkpoint carries no experiment configuration; pass --config");
  }
  return config_from_json(ck.metadata.at("config"));
}

// Datasets matching the checkpoint's trained stages.
std::vector<DomainDataset> checkpoint_datasets(const Checkpoint& ck, const ExperimentConfig& c) {
  auto datasets = load_datasets(c);
  if (datasets.size() < ck.state.stage) {
    throw InputError("checkpoint has " + std::to_string(ck.state.stage) + " stages but the configuration provides " +
                     std::to_string(datasets.size()) + " datasets");
  }
  datasets.resize(ck.state.stage);
  for (std::size_t t = 0; t < datasets.size(); ++t) {
    if (datasets[t].name != ck.state.dataset_names[t]) {
      throw InputError("dataset " + std::to_string(t + 1) + " is '" + datasets[t].name + "' but the checkpoint was trained on '" +
                       ck.state.dataset_names[t] + "'");
    }
  }
  return datasets;
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  const bool has_suite = suite.has_value();
  const bool has_paths = !data_paths.empty();
  if (has_suite == has_paths) throw ConfigError("config: exactly one of 'suite' and 'data_paths' must be given");
  if (has_suite) {
    if (suite->suite == Suite::PretrainMix) throw ConfigError("config field 'suite.name': pretrain_mix is not a continual suite");
    aligned(*suite, *this).validate();
  }
  for (const auto& p : data_paths) {
    if (!fs::exists(p)) throw InputError("dataset path does not exist: " + p.string());
  }
  if (pretrain_path && !fs::exists(*pretrain_path)) {
    throw InputError("pretrain path does not exist: " + pretrain_path->string());
  }
  if (!order.empty()) {
    std::vector<std::size_t> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (sorted[i] != i || sorted.size() != source_count(*this)) {
        throw ConfigError("config field 'order' must be a permutation of 0.." + std::to_string(source_count(*this) - 1));
      }
    }
  }
  backbone.validate();
  train.validate();
  if (pretrain.epochs == 0 || pretrain.batch_size == 0 || !(pretrain.learning_rate > 0.0) ||
      pretrain.warmup_epochs > pretrain.epochs) {
    throw ConfigError("config field 'pretrain': epochs, batch_size and learning_rate must be positive and warmup <= epochs");
  }
  if (composer.top_k == 0) throw ConfigError("config field 'composer.top_k' must be at least 1");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ConfigError("config field 'temperature' must be positive");
  if (workers == 0) throw ConfigError("config field 'workers' must be at least 1");
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  FieldReader r(j, "");
  r.read("seed", c.seed);
  if (r.has("suite")) {
    FieldReader s = r.child("suite");
    std::string name;
    s.read("name", name);
    if (name.empty()) throw ConfigError("config field 'suite.name' is required");
    GeneratorSpec spec;
    try {
      spec = GeneratorSpec::defaults(parse_suite(name));
    } catch (const InputError& e) {
      throw ConfigError(std::string("config field 'suite.name': ") + e.what());
    }
    s.read("num_domains", spec.num_domains);
    s.read("samples_per_domain", spec.samples_per_domain);
    s.read("gap_parameter", spec.gap_parameter);
    s.read("rotation", spec.rotation);
    s.read("noise", spec.noise);
    s.read("class_separation", spec.class_separation);
    s.read("train_fraction", spec.train_fraction);
    s.read("val_fraction", spec.val_fraction);
    s.finish();
    c.suite = spec;
  }
  if (r.has("data_paths")) {
    for (const auto& p : read_list<std::string>(r, "data_paths", "strings")) c.data_paths.emplace_back(p);
  }
  if (r.has("order")) c.order = read_list<std::size_t>(r, "order", "non-negative integers");
  if (r.has("pretrain_path")) {
    std::string p;
    r.read("pretrain_path", p);
    c.pretrain_path = p;
  }
  if (r.has("backbone")) {
    FieldReader b = r.child("backbone");
    b.read("input_dim", c.backbone.input_dim);
    b.read("hidden_dim", c.backbone.hidden_dim);
    b.read("num_blocks", c.backbone.num_blocks);
    b.read("vocab_size", c.backbone.vocab_size);
    b.read("adapter_downsample_factor", c.backbone.adapter.downsample_factor);
    b.finish();
  }
  if (r.has("pretrain")) {
    FieldReader p = r.child("pretrain");
    p.read("epochs", c.pretrain.epochs);
    p.read("warmup_epochs", c.pretrain.warmup_epochs);
    p.read("learning_rate", c.pretrain.learning_rate);
    p.read("batch_size", c.pretrain.batch_size);
    p.finish();
  }
  if (r.has("train")) {
    FieldReader t = r.child("train");
    t.read("epochs", c.train.epochs);
    t.read("warmup_epochs", c.train.warmup_epochs);
    t.read("learning_rate", c.train.learning_rate);
    t.read("batch_size", c.train.batch_size);
    if (t.has("init_mode")) {
      std::string mode;
      t.read("init_mode", mode);
      c.train.init_mode = parse_init_mode(mode);
    }
    t.finish();
  }
  c.train.seed = c.seed;
  if (r.has("composer")) {
    FieldReader k = r.child("composer");
    if (k.has("strategy")) {
      std::string name;
      k.read("strategy", name);
      try {
        c.composer.strategy = parse_strategy(name);
      } catch (const InputError& e) {
        throw ConfigError(std::string("config field 'composer.strategy': ") + e.what());
      }
    }
    k.read("top_k", c.composer.top_k);
    k.finish();
  }
  r.read("temperature", c.temperature);
  if (r.has("baselines")) {
    FieldReader b = r.child("baselines");
    b.read("zero_shot", c.baselines.zero_shot);
    b.read("seq_ft", c.baselines.seq_ft);
    b.read("multitask", c.baselines.multitask);
    b.read("argmax_select", c.baselines.argmax_select);
    b.read("static_average", c.baselines.static_average);
    b.read("static_regmean", c.baselines.static_regmean);
    b.read("oracle_identity", c.baselines.oracle_identity);
    b.finish();
  }
  if (r.has("out_dir")) {
    std::string out;
    r.read("out_dir", out);
    c.out_dir = out;
  }
  r.read("workers", c.workers);
  r.finish();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  if (c.suite) {
    const auto& s = *c.suite;
    j["suite"] = {{"name", suite_name(s.suite)},
                  {"num_domains", s.num_domains},
                  {"samples_per_domain", s.samples_per_domain},
                  {"gap_parameter", s.gap_parameter},
                  {"rotation", s.rotation},
                  {"noise", s.noise},
                  {"class_separation", s.class_separation},
                  {"train_fraction", s.train_fraction},
                  {"val_fraction", s.val_fraction}};
  }
  if (!c.data_paths.empty()) {
    json paths = json::array();
    for (const auto& p : c.data_paths) paths.push_back(p.string());
    j["data_paths"] = paths;
  }
  if (!c.order.empty()) j["order"] = c.order;
  if (c.pretrain_path) j["pretrain_path"] = c.pretrain_path->string();
  j["backbone"] = {{"input_dim", c.backbone.input_dim},
                   {"hidden_dim", c.backbone.hidden_dim},
                   {"num_blocks", c.backbone.num_blocks},
                   {"vocab_size", c.backbone.vocab_size},
                   {"adapter_downsample_factor", c.backbone.adapter.downsample_factor}};
  j["pretrain"] = {{"epochs", c.pretrain.epochs},
                   {"warmup_epochs", c.pretrain.warmup_epochs},
                   {"learning_rate", c.pretrain.learning_rate},
                   {"batch_size", c.pretrain.batch_size}};
  j["train"] = {{"epochs", c.train.epochs},
                {"warmup_epochs", c.train.warmup_epochs},
                {"learning_rate", c.train.learning_rate},
                {"batch_size", c.train.batch_size},
                {"init_mode", init_mode_name(c.train.init_mode)}};
  j["composer"] = {{"strategy", strategy_name(c.composer.strategy)}, {"top_k", c.composer.top_k}};
  j["temperature"] = c.temperature;
  j["baselines"] = {{"zero_shot", c.baselines.zero_shot},
                    {"seq_ft", c.baselines.seq_ft},
                    {"multitask", c.baselines.multitask},
                    {"argmax_select", c.baselines.argmax_select},
                    {"static_average", c.baselines.static_average},
                    {"static_regmean", c.baselines.static_regmean},
                    {"oracle_identity", c.baselines.oracle_identity}};
  j["out_dir"] = c.out_dir.string();
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  return j;
}

ExperimentConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw InputError("config file does not exist: " + path.string());
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& c) {
  json j = config_to_json(c);
  j.erase("out_dir");
  j.erase("workers");
  const std::string canonical = j.dump();
  return hex64(fnv1a(std::as_bytes(std::span(canonical.data(), canonical.size()))));
}

fs::path resolve_output(const fs::path& out) {
  if (out.is_absolute()) return out;
  if (const char* root = std::getenv(kOutputRootVariable); root && *root) return fs::path(root) / out;
  return out;
}

std::vector<DomainDataset> load_datasets(const ExperimentConfig& c) {
  c.validate();
  std::vector<DomainDataset> sources;
  if (c.suite) {
    sources = generate_suite(aligned(*c.suite, c));
  } else {
    const IngestSchema schema{c.backbone.input_dim, c.backbone.vocab_size};
    for (const auto& p : c.data_paths) sources.push_back(ingest_jsonl(p, schema));
  }
  if (c.order.empty()) return sources;
  std::vector<DomainDataset> ordered;
  for (auto i : c.order) ordered.push_back(sources[i]);
  return ordered;
}

Backbone build_backbone(const ExperimentConfig& c) {
  c.validate();
  DomainDataset mixture;
  if (c.pretrain_path) {
    mixture = ingest_jsonl(*c.pretrain_path, IngestSchema{c.backbone.input_dim, c.backbone.vocab_size});
  } else {
    GeneratorSpec spec = aligned(GeneratorSpec::defaults(Suite::PretrainMix), c);
    if (c.suite) {
      spec.noise = c.suite->noise;
      spec.class_separation = c.suite->class_separation;
    }
    mixture = generate_suite(spec).front();
  }
  return pretrain_backbone(mixture, c.backbone, c.seed, c.pretrain);
}

json scores_to_json(const ScoreMatrix& s) { return s.rows(); }

json report_to_json(const MetricsReport& r) {
  json j = {{"strategy", r.strategy},
            {"top_k", r.top_k},
            {"average_accuracy", r.average_accuracy},
            {"forgetting", r.forgetting ? json(*r.forgetting) : json(nullptr)},
            {"per_dataset", r.per_dataset},
            {"router_accuracy", r.router_accuracy ? json(*r.router_accuracy) : json(nullptr)}};
  if (r.scores) j["scores"] = scores_to_json(*r.scores);
  return j;
}

MetricsReport report_from_json(const json& j) {
  try {
    MetricsReport r;
    r.strategy = j.at("strategy").get<std::string>();
    r.top_k = j.value("top_k", std::size_t{0});
    r.per_dataset = j.at("per_dataset").get<std::vector<double>>();
    if (r.per_dataset.empty()) throw SchemaError("report '" + r.strategy + "' has no per-dataset accuracies");
    const double mean = std::accumulate(r.per_dataset.begin(), r.per_dataset.end(), 0.0) /
                        static_cast<double>(r.per_dataset.size());
    r.average_accuracy = mean;
    if (j.contains("average_accuracy") && std::abs(j.at("average_accuracy").get<double>() - mean) > 1e-9) {
      throw SchemaError("report '" + r.strategy + "': average_accuracy disagrees with its per-dataset entries");
    }
    if (j.contains("forgetting") && !j.at("forgetting").is_null()) r.forgetting = j.at("forgetting").get<double>();
    if (j.contains("router_accuracy") && !j.at("router_accuracy").is_null()) {
      r.router_accuracy = j.at("router_accuracy").get<double>();
    }
    if (j.contains("scores")) r.scores = ScoreMatrix(j.at("scores").get<std::vector<std::vector<double>>>());
    return r;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed report: ") + e.what());
  } catch (const ContractError& e) {
    throw SchemaError(std::string("malformed report: ") + e.what());
  }
}

TrainResult cmd_train(const ExperimentConfig& config, bool resume, std::ostream& log) {
  config.validate();
  const std::string hash = config_hash(config);
  const fs::path out = resolve_output(config.out_dir);
  const auto datasets = load_datasets(config);
  const std::size_t num = datasets.size();

  TrainerState initial;
  initial.router.temperature = config.temperature;
  std::optional<Backbone> backbone;
  if (resume && fs::is_directory(out / "stages")) {
    for (std::size_t t = num; t >= 1 && !backbone; --t) {
      const fs::path dir = out / "stages" / ("stage_" + std::to_string(t));
      if (!fs::exists(dir / "manifest.json")) continue;
      Checkpoint ck = load_checkpoint(dir);
      if (ck.metadata.value("config_hash", std::string()) != hash) continue;
      backbone.emplace(ck.backbone_config, std::move(ck.backbone_weights));
      initial = std::move(ck.state);
      log << "resuming " << out.string() << " after stage " << t << "/" << num << "\n";
    }
  }
  if (!backbone) backbone.emplace(build_backbone(config));

  const EvalOptions options{config.workers};
  auto on_stage = [&](const TrainerState& s) {
    save_checkpoint(out / "stages" / ("stage_" + std::to_string(s.stage)), make_checkpoint(*backbone, s, config));
    log << "stage " << s.stage << "/" << num << " " << s.dataset_names.back() << ": loss "
        << s.stage_losses.back().first << " -> " << s.stage_losses.back().second
        << ", A_t = " << percent(average_accuracy(s.scores, s.stage)) << "\n";
  };
  TrainResult result;
  result.out_dir = out;
  result.state = run_sequence(*backbone, datasets, config.train, config.composer, std::move(initial), on_stage, options);
  const TrainerState& state = result.state;
  save_checkpoint(out / "checkpoint", make_checkpoint(*backbone, state, config));

  const double router_acc = suite_router_accuracy(*backbone, state.router, datasets);
  const std::size_t k = std::min(config.composer.top_k, num);
  auto& reports = result.reports;
  reports.push_back(make_report(strategy_name(config.composer.strategy), k, state.scores,
                                routed(config.composer.strategy) ? std::optional(router_acc) : std::nullopt));
  const std::pair<Strategy, bool> composed[] = {{Strategy::ArgmaxSelect, config.baselines.argmax_select},
                                                {Strategy::StaticAverage, config.baselines.static_average},
                                                {Strategy::StaticRegMean, config.baselines.static_regmean},
                                                {Strategy::OracleIdentity, config.baselines.oracle_identity}};
  for (const auto& [strategy, enabled] : composed) {
    if (!enabled || strategy == config.composer.strategy) continue;
    const ComposerConfig cc{strategy, config.composer.top_k};
    const auto scores = prefix_score_matrix(*backbone, state.bank, state.router, state.grams, datasets, cc, options);
    reports.push_back(make_report(strategy_name(strategy), strategy == Strategy::ArgmaxSelect ? 1 : num, scores,
                                  routed(strategy) ? std::optional(router_acc) : std::nullopt));
  }
  if (config.baselines.zero_shot) reports.push_back(make_report("zero_shot", 0, run_zero_shot(*backbone, datasets).scores, std::nullopt));
  if (config.baselines.seq_ft) reports.push_back(make_report("seq_ft", 0, run_seq_ft(*backbone, datasets, config.train).scores, std::nullopt));
  if (config.baselines.multitask) {
    reports.push_back(make_final_report("multitask", 0, run_multitask(*backbone, datasets, config.train).final_accuracies,
                                        std::nullopt));
  }

  const json header = {{"config_hash", hash}, {"seed", config.seed}, {"dataset_names", state.dataset_names}};
  json score_artifact = header;
  score_artifact["strategy"] = strategy_name(config.composer.strategy);
  score_artifact["top_k"] = k;
  score_artifact["scores"] = scores_to_json(state.scores);
  write_json(out / "score_matrix.json", score_artifact);

  json report_artifact = header;
  report_artifact["reports"] = json::array();
  for (const auto& r : reports) report_artifact["reports"].push_back(report_to_json(r));
  write_json(out / "report.json", report_artifact);
  log << "wrote " << (out / "report.json").string() << "\n";
  return result;
}

MetricsReport cmd_eval(const EvalRequest& request, std::ostream& log) {
  const Checkpoint ck = load_checkpoint(request.checkpoint);
  const ExperimentConfig config = config_of(ck, request.config);
  const auto datasets = checkpoint_datasets(ck, config);
  const Backbone backbone(ck.backbone_config, ck.backbone_weights);

  RouterState router = ck.state.router;
  if (request.temperature) {
    if (!(*request.temperature > 0.0)) throw InputError("--temperature must be positive");
    router.temperature = *request.temperature;
  }
  ComposerConfig cc = ck.composer;
  if (request.strategy) cc.strategy = *request.strategy;
  if (request.top_k) cc.top_k = *request.top_k;
  if (request.oracle_identity) cc.strategy = Strategy::OracleIdentity;
  if (cc.top_k == 0) throw InputError("--top-k must be at least 1");

  const auto scores = prefix_score_matrix(backbone, ck.state.bank, router, ck.state.grams, datasets, cc,
                                          EvalOptions{request.workers});
  const std::size_t k = std::min(cc.top_k, datasets.size());
  std::optional<double> router_acc;
  if (routed(cc.strategy)) router_acc = suite_router_accuracy(backbone, router, datasets);
  MetricsReport report = make_report(strategy_name(cc.strategy), k, scores, router_acc);

  const fs::path out = request.out ? resolve_output(*request.out) : request.checkpoint.parent_path() / "eval";
  json artifact = {{"config_hash", ck.metadata.value("config_hash", std::string())},
                   {"seed", ck.metadata.value("seed", std::uint64_t{0})},
                   {"dataset_names", ck.state.dataset_names},
                   {"reports", json::array({report_to_json(report)})}};
  const fs::path file = out / ("eval_" + std::string(strategy_name(cc.strategy)) + "_k" + std::to_string(k) + ".json");
  write_json(file, artifact);
  log << strategy_name(cc.strategy) << " (k=" << k << "): A_T = " << percent(report.average_accuracy)
      << ", F_T = " << percent(*report.forgetting);
  if (router_acc) log << ", router accuracy = " << percent(*router_acc);
  log << "\nwrote " << file.string() << "\n";
  return report;
}

std::vector<double> dedupe_grid(std::vector<double> grid, bool* had_duplicates) {
  std::sort(grid.begin(), grid.end());
  const auto before = grid.size();
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (had_duplicates) *had_duplicates = grid.size() != before;
  return grid;
}

SweepResult cmd_sweep(const SweepRequest& request, std::ostream& log, std::ostream& warn) {
  if (request.grid.empty()) throw InputError("--accuracy-grid must list at least one value");
  for (double v : request.grid) {
    if (!(v >= 0.0 && v <= 1.0)) throw InputError("--accuracy-grid values must lie in [0, 1]");
  }
  bool dup = false;
  const auto grid = dedupe_grid(request.grid, &dup);
  if (dup) warn << "warning: duplicate accuracy-grid values removed\n";

  const Checkpoint ck = load_checkpoint(request.checkpoint);
  const ExperimentConfig config = config_of(ck, request.config);
  const auto datasets = checkpoint_datasets(ck, config);
  const Backbone backbone(ck.backbone_config, ck.backbone_weights);
  const std::size_t k = request.top_k.value_or(ck.composer.top_k);
  if (k == 0) throw InputError("--top-k must be at least 1");
  const SweepResult sweep = merging_gain_sweep(backbone, ck.state.bank, datasets, grid, k, request.seed);

  const fs::path out = request.out ? resolve_output(*request.out) : request.checkpoint.parent_path() / "sweep";
  json rows = json::array();
  std::ostringstream table;
  table << "target_accuracy\trouter_accuracy\tmerged_accuracy\targmax_accuracy\tgain\tgain_over_argmax\tgain_over_upper_bound\n";
  table.precision(17);
  for (const auto& r : sweep.rows) {
    rows.push_back({{"target_accuracy", r.target_accuracy},
                    {"router_accuracy", r.router_accuracy},
                    {"merged_accuracy", r.merged_accuracy},
                    {"argmax_accuracy", r.argmax_accuracy},
                    {"gain", r.gain},
                    {"gain_over_argmax", r.gain_over_argmax},
                    {"gain_over_upper_bound", r.gain_over_upper_bound}});
    table << r.target_accuracy << '\t' << r.router_accuracy << '\t' << r.merged_accuracy << '\t' << r.argmax_accuracy
          << '\t' << r.gain << '\t' << r.gain_over_argmax << '\t' << r.gain_over_upper_bound << '\n';
  }
  write_json(out / "sweep.json", {{"config_hash", ck.metadata.value("config_hash", std::string())},
                                  {"seed", request.seed},
                                  {"top_k", std::min(k, datasets.size())},
                                  {"upper_bound_accuracy", sweep.upper_bound_accuracy},
                                  {"rank_correlation", sweep.rank_correlation},
                                  {"rows", rows}});
  write_file_atomic(out / "sweep.tsv", table.str());
  for (const auto& r : sweep.rows) {
    log << "router " << percent(r.router_accuracy) << "  merged " << percent(r.merged_accuracy) << "  argmax "
        << percent(r.argmax_accuracy) << "  gain " << percent(r.gain) << "\n";
  }
  log << "spearman(accuracy, gain) = " << sweep.rank_correlation << "\nwrote " << (out / "sweep.json").string() << "\n";
  return sweep;
}

std::string render_table(const std::vector<std::string>& names, const std::vector<MetricsReport>& reports) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> head{"Method"};
  head.insert(head.end(), names.begin(), names.end());
  head.push_back("Avg.");
  cells.push_back(head);
  for (const auto& r : reports) {
    if (r.per_dataset.size() != names.size()) {
      throw SchemaError("report '" + r.strategy + "' has " + std::to_string(r.per_dataset.size()) + " accuracies for " +
                        std::to_string(names.size()) + " datasets");
    }
    std::vector<std::string> row{r.strategy};
    for (double v : r.per_dataset) row.push_back(percent(v));
    std::string avg = percent(std::accumulate(r.per_dataset.begin(), r.per_dataset.end(), 0.0) /
                              static_cast<double>(r.per_dataset.size()));
    if (r.forgetting) {
      const std::string f = percent(*r.forgetting);
      avg += f == "0.0" ? " (0.0)" : " (-" + f + ")";
    }
    row.push_back(avg);
    cells.push_back(row);
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : cells)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());

  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << "  ";
      if (i == 0) out << row[i] << std::string(width[i] - row[i].size(), ' ');
      else out << std::string(width[i] - row[i].size(), ' ') << row[i];
    }
    out << "\n";
  };
  line(cells[0]);
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  out << std::string(total - 2, '-') << "\n";
  for (std::size_t i = 1; i < cells.size(); ++i) line(cells[i]);
  out << "\nAccuracy in %. Forgetting in parentheses is negated (table convention); report.json stores the\n"
         "non-negative value.\n";
  return out.str();
}

std::string cmd_report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("artifacts directory not found: " + dir.string());
  std::vector<std::string> missing;
  for (const char* name : {"report.json"}) {
    if (!fs::exists(dir / name)) missing.push_back(name);
  }
  if (!missing.empty()) {
    std::string msg = "missing artifacts in " + dir.string() + ":";
    for (const auto& m : missing) msg += " " + m;
    throw InputError(msg);
  }
  const json j = read_json(dir / "report.json");
  std::vector<MetricsReport> reports;
  std::vector<std::string> names;
  try {
    names = j.at("dataset_names").get<std::vector<std::string>>();
    for (const auto& r : j.at("reports")) reports.push_back(report_from_json(r));
  } catch (const json::exception& e) {
    throw SchemaError((dir / "report.json").string() + ": " + e.what());
  }
  std::string header;
  if (j.contains("config_hash")) header += "config " + j.at("config_hash").get<std::string>();
  if (j.contains("seed")) header += (header.empty() ? "" : ", ") + std::string("seed ") + j.at("seed").dump();
  return (header.empty() ? "" : header + "\n\n") + render_table(names, reports);
}

std::vector<fs::path> cmd_generate(const ExperimentConfig& config, const fs::path& out) {
  if (!config.suite) throw ConfigError("generate needs a 'suite' data source");
  const auto datasets = load_datasets(config);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error("cannot create " + out.string() + ": " + ec.message());
  std::vector<fs::path> paths;
  for (const auto& ds : datasets) {
    paths.push_back(out / (ds.name + ".jsonl"));
    export_jsonl(ds, paths.back());
  }
  return paths;
}

}  // namespace dam
