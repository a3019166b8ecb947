// SPDX-License-Identifier: Apache-2.0
#include "dam/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "dam/error.hpp"

namespace dam {

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw InputError("unknown split '" + name + "'");
}

std::size_t DomainDataset::input_dim() const {
  if (samples.empty()) throw InputError("dataset '" + name + "' is empty");
  return samples.front().features.size();
}

const std::vector<std::size_t>& DomainDataset::indices(Split s) const {
  switch (s) {
    case Split::Train: return train;
    case Split::Val: return val;
    case Split::Test: return test;
  }
  return test;
}

DenseArray DomainDataset::features(Split s) const {
  const auto& idx = indices(s);
  if (idx.empty()) throw InputError("dataset '" + name + "' has an empty " + split_name(s) + " split");
  const std::size_t d = input_dim();
  std::vector<float> values;
  values.reserve(idx.size() * d);
  for (auto i : idx) {
    const auto& f = samples[i].features.values();
    values.insert(values.end(), f.begin(), f.end());
  }
  return DenseArray({idx.size(), d}, std::move(values));
}

std::vector<int> DomainDataset::labels(Split s) const {
  std::vector<int> out;
  for (auto i : indices(s)) out.push_back(samples[i].label);
  return out;
}

void DomainDataset::validate(std::size_t vocab_size) const {
  const std::size_t d = input_dim();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].features.rank() != 1 || samples[i].features.size() != d) {
      throw SchemaError("dataset '" + name + "': sample " + std::to_string(i) + " has wrong feature length");
    }
    if (samples[i].label < 0 || static_cast<std::size_t>(samples[i].label) >= vocab_size) {
      throw SchemaError("dataset '" + name + "': sample " + std::to_string(i) + " label outside vocabulary");
    }
  }
  std::vector<int> seen(samples.size(), 0);
  for (const auto* split : {&train, &val, &test}) {
    for (auto i : *split) {
      if (i >= samples.size()) throw SchemaError("dataset '" + name + "': split index out of range");
      if (seen[i]++) throw SchemaError("dataset '" + name + "': sample " + std::to_string(i) + " in two splits");
    }
  }
}

const char* suite_name(Suite s) {
  switch (s) {
    case Suite::LargeGap: return "large_gap";
    case Suite::SmallGap: return "small_gap";
    case Suite::PretrainMix: return "pretrain_mix";
  }
  return "?";
}

Suite parse_suite(const std::string& name) {
  if (name == "large_gap") return Suite::LargeGap;
  if (name == "small_gap") return Suite::SmallGap;
  if (name == "pretrain_mix") return Suite::PretrainMix;
  throw InputError("unknown suite '" + name + "' (expected large_gap, small_gap or pretrain_mix)");
}

GeneratorSpec GeneratorSpec::defaults(Suite suite) {
  GeneratorSpec s;
  s.suite = suite;
  switch (suite) {
    case Suite::LargeGap:
      s.num_domains = 4;
      s.samples_per_domain = 1000;
      s.gap_parameter = 20.0;
      s.rotation = 1.5707963267948966;
      break;
    case Suite::SmallGap:
      s.num_domains = 5;
      s.samples_per_domain = 150;
      s.gap_parameter = 0.3;
      s.rotation = 1.5707963267948966;
      break;
    case Suite::PretrainMix:
      s.num_domains = 1;
      s.samples_per_domain = 4000;
      s.gap_parameter = 0.0;
      s.rotation = 0.0;
      break;
  }
  return s;
}

void GeneratorSpec::validate() const {
  if (num_domains < 1) throw InputError("generator: num_domains must be >= 1");
  if (samples_per_domain < 3) throw InputError("generator: samples_per_domain must be >= 3");
  if (gap_parameter < 0.0) throw InputError("generator: gap_parameter must be >= 0");
  if (input_dim < 2) throw InputError("generator: input_dim must be >= 2");
  if (num_classes < 2) throw InputError("generator: num_classes must be >= 2");
  if (noise <= 0.0) throw InputError("generator: noise must be positive");
  if (train_fraction <= 0.0 || val_fraction < 0.0 || train_fraction + val_fraction >= 1.0) {
    throw InputError("generator: split fractions must leave a non-empty test split");
  }
}

namespace {

using Matrix = std::vector<std::vector<double>>;  // row-major, square

std::vector<double> gaussian_vector(std::mt19937_64& rng, int n, double scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = scale * normal(rng);
  return v;
}

std::vector<double> unit_vector(std::mt19937_64& rng, int n) {
  auto v = gaussian_vector(rng, n, 1.0);
  double s = 0.0;
  for (double x : v) s += x * x;
  s = std::sqrt(s);
  for (auto& x : v) x /= s;
  return v;
}

// Haar-random orthonormal basis via Gram-Schmidt.
Matrix random_basis(std::mt19937_64& rng, int n) {
  Matrix q;
  while (static_cast<int>(q.size()) < n) {
    auto v = gaussian_vector(rng, n, 1.0);
    for (const auto& b : q) {
      double d = 0.0;
      for (int i = 0; i < n; ++i) d += v[i] * b[i];
      for (int i = 0; i < n; ++i) v[i] -= d * b[i];
    }
    double s = 0.0;
    for (double x : v) s += x * x;
    s = std::sqrt(s);
    if (s < 1e-8) continue;
    for (auto& x : v) x /= s;
    q.push_back(std::move(v));
  }
  return q;
}

// Rotation by `angle` inside consecutive planes of a random basis.
Matrix plane_rotation(std::mt19937_64& rng, int n, double angle) {
  const Matrix q = random_basis(rng, n);
  Matrix r(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (int i = 0; i < n; ++i) r[i][i] = 1.0;
  const double c = std::cos(angle) - 1.0, s = std::sin(angle);
  for (int p = 0; p + 1 < n; p += 2) {
    const auto& a = q[p];
    const auto& b = q[p + 1];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) r[i][j] += c * (a[i] * a[j] + b[i] * b[j]) + s * (b[i] * a[j] - a[i] * b[j]);
  }
  return r;
}

std::vector<double> rotate(const Matrix& r, const std::vector<double>& x) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) y[i] += r[i][j] * x[j];
  return y;
}

struct DomainTransform {
  Matrix rotation;  // empty means identity
  std::vector<double> shift;
};

DomainDataset sample_domain(const GeneratorSpec& spec, const std::vector<std::vector<double>>& prototypes,
                            const DomainTransform& transform, int domain_id, std::uint64_t stream,
                            std::string name) {
  std::mt19937_64 rng(spec.seed * 0x9E3779B97F4A7C15ULL + stream);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = spec.samples_per_domain;
  const int dim = spec.input_dim;

  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels[i] = i % spec.num_classes;
  std::shuffle(labels.begin(), labels.end(), rng);

  DomainDataset ds;
  ds.name = std::move(name);
  ds.samples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<double> x = prototypes[labels[i]];
    for (auto& v : x) v += spec.noise * normal(rng);
    if (!transform.rotation.empty()) x = rotate(transform.rotation, x);
    for (int j = 0; j < dim; ++j) x[j] += transform.shift[j];
    std::vector<float> f(x.begin(), x.end());
    ds.samples.push_back(Sample{DenseArray::vector(std::move(f)), labels[i], domain_id});
  }

  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[i] = static_cast<std::size_t>(i);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * n));
  const auto n_val = static_cast<std::size_t>(std::floor(spec.val_fraction * n));
  ds.train.assign(order.begin(), order.begin() + n_train);
  ds.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  ds.test.assign(order.begin() + n_train + n_val, order.end());
  std::sort(ds.train.begin(), ds.train.end());
  std::sort(ds.val.begin(), ds.val.end());
  std::sort(ds.test.begin(), ds.test.end());
  return ds;
}

}  // namespace

std::vector<DomainDataset> generate_suite(const GeneratorSpec& spec) {
  spec.validate();
  const int dim = spec.input_dim;

  // Prototypes come from the seed alone so every suite shares the label space.
  std::mt19937_64 world(spec.seed);
  std::vector<std::vector<double>> prototypes;
  for (int c = 0; c < spec.num_classes; ++c) {
    prototypes.push_back(gaussian_vector(world, dim, spec.class_separation * spec.noise));
  }

  std::mt19937_64 rng(spec.seed ^ (0xD1B54A32D192ED03ULL * (static_cast<std::uint64_t>(spec.suite) + 1)));
  std::vector<DomainDataset> out;
  const std::string prefix = suite_name(spec.suite);

  switch (spec.suite) {
    case Suite::PretrainMix: {
      for (int d = 0; d < spec.num_domains; ++d) {
        DomainTransform t{{}, std::vector<double>(static_cast<std::size_t>(dim), 0.0)};
        out.push_back(sample_domain(spec, prototypes, t, d, 1000 + d, prefix + "_" + std::to_string(d)));
      }
      break;
    }
    case Suite::LargeGap: {
      for (int d = 0; d < spec.num_domains; ++d) {
        DomainTransform t;
        t.rotation = plane_rotation(rng, dim, spec.rotation);
        t.shift = unit_vector(rng, dim);
        for (auto& v : t.shift) v *= spec.gap_parameter * spec.noise;
        out.push_back(sample_domain(spec, prototypes, t, d, 2000 + d, prefix + "_" + std::to_string(d)));
      }
      break;
    }
    case Suite::SmallGap: {
      const Matrix shared = plane_rotation(rng, dim, spec.rotation);
      for (int d = 0; d < spec.num_domains; ++d) {
        DomainTransform t;
        t.rotation = shared;
        t.shift = unit_vector(rng, dim);
        for (auto& v : t.shift) v *= spec.gap_parameter * spec.noise;
        out.push_back(sample_domain(spec, prototypes, t, d, 3000 + d, prefix + "_" + std::to_string(d)));
      }
      break;
    }
  }
  return out;
}

DomainDataset concatenate(std::span<const DomainDataset> parts, std::string name) {
  DomainDataset out;
  out.name = std::move(name);
  for (const auto& p : parts) {
    const std::size_t base = out.samples.size();
    out.samples.insert(out.samples.end(), p.samples.begin(), p.samples.end());
    for (auto i : p.train) out.train.push_back(base + i);
    for (auto i : p.val) out.val.push_back(base + i);
    for (auto i : p.test) out.test.push_back(base + i);
  }
  return out;
}

DomainDataset ingest_jsonl(const std::filesystem::path& path, const IngestSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path.string() + "'");

  DomainDataset ds;
  ds.name = path.stem().string();
  std::vector<std::string> problems;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(line_no);

    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      problems.push_back(where + ": malformed JSON");
      continue;
    }
    if (!rec.is_object() || !rec.contains("features") || !rec["features"].is_array() || !rec.contains("label") ||
        !rec["label"].is_number_integer() || !rec.contains("split") || !rec["split"].is_string()) {
      problems.push_back(where + ": record needs features (array), label (int) and split (string)");
      continue;
    }
    if (rec["features"].size() != schema.feature_dim) {
      throw SchemaError(where + ": expected " + std::to_string(schema.feature_dim) + " features, got " +
                        std::to_string(rec["features"].size()));
    }
    const auto label = rec["label"].get<long long>();
    if (label < 0 || static_cast<unsigned long long>(label) >= schema.vocab_size) {
      throw SchemaError(where + ": label " + std::to_string(label) + " outside vocabulary of size " +
                        std::to_string(schema.vocab_size));
    }
    std::vector<float> f;
    f.reserve(schema.feature_dim);
    bool numeric = true;
    for (const auto& v : rec["features"]) {
      if (!v.is_number()) {
        numeric = false;
        break;
      }
      f.push_back(v.get<float>());
    }
    if (!numeric) {
      problems.push_back(where + ": non-numeric feature");
      continue;
    }
    int domain = -1;
    if (rec.contains("domain") && !rec["domain"].is_null()) {
      if (!rec["domain"].is_number_integer()) {
        problems.push_back(where + ": domain must be an integer");
        continue;
      }
      domain = rec["domain"].get<int>();
    }
    Split split;
    try {
      split = parse_split(rec["split"].get<std::string>());
    } catch (const InputError&) {
      problems.push_back(where + ": unknown split '" + rec["split"].get<std::string>() + "'");
      continue;
    }
    const std::size_t idx = ds.samples.size();
    ds.samples.push_back(Sample{DenseArray::vector(std::move(f)), static_cast<int>(label), domain});
    switch (split) {
      case Split::Train: ds.train.push_back(idx); break;
      case Split::Val: ds.val.push_back(idx); break;
      case Split::Test: ds.test.push_back(idx); break;
    }
  }
  if (!problems.empty()) {
    std::ostringstream os;
    os << "ingestion of '" << path.string() << "' failed:";
    for (const auto& p : problems) os << "\n  " << p;
    throw IngestionError(os.str());
  }
  if (ds.samples.empty()) throw IngestionError("'" + path.string() + "' contains no records");
  return ds;
}

void export_jsonl(const DomainDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  std::vector<const char*> membership(dataset.samples.size(), nullptr);
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    for (auto i : dataset.indices(s)) membership.at(i) = split_name(s);
  }
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    if (!membership[i]) continue;
    const auto& smp = dataset.samples[i];
    nlohmann::json rec;
    rec["features"] = smp.features.values();
    rec["label"] = smp.label;
    if (smp.domain >= 0) rec["domain"] = smp.domain;
    rec["split"] = membership[i];
    out << rec.dump() << '\n';
  }
}

}  // namespace dam
