// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <fstream>
#include <map>
#include <set>

#include "dam/data.hpp"
#include "dam/error.hpp"
#include "support.hpp"

using namespace dam;

namespace {

// Nearest class mean fitted on one dataset's train split.
double nearest_mean_accuracy(const DomainDataset& fit, const DomainDataset& eval, int classes) {
  const std::size_t d = fit.input_dim();
  std::vector<std::vector<double>> mean(classes, std::vector<double>(d, 0.0));
  std::vector<int> count(classes, 0);
  for (auto i : fit.train) {
    const auto& s = fit.samples[i];
    for (std::size_t j = 0; j < d; ++j) mean[s.label][j] += s.features[j];
    ++count[s.label];
  }
  for (int c = 0; c < classes; ++c)
    for (auto& v : mean[c]) v /= count[c];
  std::size_t hit = 0;
  for (auto i : eval.test) {
    const auto& s = eval.samples[i];
    int best = 0;
    double best_d = 1e300;
    for (int c = 0; c < classes; ++c) {
      double dist = 0.0;
      for (std::size_t j = 0; j < d; ++j) dist += (s.features[j] - mean[c][j]) * (s.features[j] - mean[c][j]);
      if (dist < best_d) best_d = dist, best = c;
    }
    hit += best == s.label;
  }
  return static_cast<double>(hit) / static_cast<double>(eval.test.size());
}

void write_lines(const std::filesystem::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p);
  for (const auto& l : lines) out << l << "\n";
}

std::string record(std::size_t dim, int label, const char* split) {
  std::string f = "[";
  for (std::size_t i = 0; i < dim; ++i) f += (i ? ",0.5" : "0.5");
  return "{\"features\":" + f + "],\"label\":" + std::to_string(label) + ",\"split\":\"" + split + "\"}";
}

}  // namespace

TEST_CASE("equal specs generate identical suites") {
  for (Suite s : {Suite::LargeGap, Suite::SmallGap, Suite::PretrainMix}) {
    auto spec = GeneratorSpec::defaults(s);
    spec.samples_per_domain = 120;
    CHECK(generate_suite(spec) == generate_suite(spec));
    auto other = spec;
    other.seed = 9;
    CHECK_FALSE(generate_suite(spec) == generate_suite(other));
  }
}

TEST_CASE("default suites have the documented sizes") {
  CHECK(generate_suite(GeneratorSpec::defaults(Suite::LargeGap)).size() == 4);
  CHECK(generate_suite(GeneratorSpec::defaults(Suite::SmallGap)).size() == 5);
  CHECK(generate_suite(GeneratorSpec::defaults(Suite::PretrainMix)).size() == 1);
}

TEST_CASE("labels are balanced and splits are disjoint and complete") {
  for (Suite s : {Suite::LargeGap, Suite::SmallGap}) {
    for (const auto& ds : generate_suite(GeneratorSpec::defaults(s))) {
      ds.validate(16);
      std::map<int, int> hist;
      for (const auto& smp : ds.samples) ++hist[smp.label];
      const double uniform = static_cast<double>(ds.samples.size()) / 16.0;
      for (const auto& [label, n] : hist) CHECK(std::abs(n - uniform) / uniform < 0.1);
      std::set<std::size_t> seen;
      for (Split sp : {Split::Train, Split::Val, Split::Test})
        for (auto i : ds.indices(sp)) CHECK(seen.insert(i).second);
      CHECK(seen.size() == ds.samples.size());
      CHECK(ds.train.size() == static_cast<std::size_t>(0.6 * ds.samples.size()));
    }
  }
}

TEST_CASE("zero gap on the small-gap suite gives identically distributed domains") {
  auto spec = GeneratorSpec::defaults(Suite::SmallGap);
  spec.gap_parameter = 0.0;
  spec.samples_per_domain = 2000;
  const auto suite = generate_suite(spec);
  const double in_domain = nearest_mean_accuracy(suite[0], suite[0], 16);
  for (std::size_t d = 1; d < suite.size(); ++d) {
    CHECK(std::abs(nearest_mean_accuracy(suite[0], suite[d], 16) - in_domain) <= 0.02);
  }
}

TEST_CASE("unknown suite names are input errors") {
  CHECK_THROWS_AS(parse_suite("medium_gap"), InputError);
  CHECK(parse_suite("small_gap") == Suite::SmallGap);
}

TEST_CASE("invalid generator specs are rejected") {
  auto spec = GeneratorSpec::defaults(Suite::LargeGap);
  spec.gap_parameter = -1.0;
  CHECK_THROWS_AS(generate_suite(spec), InputError);
  spec = GeneratorSpec::defaults(Suite::LargeGap);
  spec.num_domains = 0;
  CHECK_THROWS_AS(generate_suite(spec), InputError);
}

TEST_CASE("export then ingest reproduces the dataset") {
  const auto dir = testing::scratch_dir("roundtrip");
  auto spec = GeneratorSpec::defaults(Suite::LargeGap);
  spec.samples_per_domain = 200;
  const auto ds = generate_suite(spec)[1];
  export_jsonl(ds, dir / (ds.name + ".jsonl"));
  CHECK(ingest_jsonl(dir / (ds.name + ".jsonl"), IngestSchema{32, 16}) == ds);
}

TEST_CASE("an empty file is an ingestion error") {
  const auto dir = testing::scratch_dir("empty");
  write_lines(dir / "empty.jsonl", {});
  CHECK_THROWS_AS(ingest_jsonl(dir / "empty.jsonl", IngestSchema{4, 3}), IngestionError);
  CHECK_THROWS_AS(ingest_jsonl(dir / "missing.jsonl", IngestSchema{4, 3}), IngestionError);
}

TEST_CASE("labels outside the vocabulary name their line") {
  const auto dir = testing::scratch_dir("label");
  write_lines(dir / "d.jsonl", {record(4, 0, "train"), record(4, 7, "test")});
  try {
    ingest_jsonl(dir / "d.jsonl", IngestSchema{4, 3});
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("d.jsonl:2") != std::string::npos);
  }
}

TEST_CASE("feature dimension mismatch is a schema error") {
  const auto dir = testing::scratch_dir("dim");
  write_lines(dir / "d.jsonl", {record(5, 0, "train")});
  CHECK_THROWS_AS(ingest_jsonl(dir / "d.jsonl", IngestSchema{4, 3}), SchemaError);
}

TEST_CASE("malformed records are all listed with line numbers") {
  const auto dir = testing::scratch_dir("malformed");
  write_lines(dir / "d.jsonl", {record(4, 0, "train"), "{not json", record(4, 1, "valid"), "[1,2]"});
  try {
    ingest_jsonl(dir / "d.jsonl", IngestSchema{4, 3});
    FAIL("expected an ingestion error");
  } catch (const IngestionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("d.jsonl:2") != std::string::npos);
    CHECK(msg.find("d.jsonl:3") != std::string::npos);
    CHECK(msg.find("d.jsonl:4") != std::string::npos);
  }
}

TEST_CASE("concatenation remaps split indices") {
  auto spec = GeneratorSpec::defaults(Suite::SmallGap);
  spec.samples_per_domain = 50;
  const auto suite = generate_suite(spec);
  const auto joint = concatenate(suite, "joint");
  CHECK(joint.samples.size() == 250);
  CHECK(joint.train.size() == 5 * suite[0].train.size());
  CHECK(joint.samples[joint.test.back()] == suite.back().samples[suite.back().test.back()]);
}
