// SPDX-License-Identifier: Apache-2.0
//
// Domain-incremental datasets: synthetic suites with a shared label space
// and domain-specific input distributions, plus line-delimited JSON ingest.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dam/tensor.hpp"

namespace dam {

struct Sample {
  DenseArray features;  // [input_dim]
  int label = 0;
  int domain = -1;  // -1 when unknown

  friend bool operator==(const Sample&, const Sample&) = default;
};

enum class Split { Train, Val, Test };

const char* split_name(Split s);
Split parse_split(const std::string& name);

struct DomainDataset {
  std::string name;
  std::vector<Sample> samples;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  std::size_t input_dim() const;
  const std::vector<std::size_t>& indices(Split s) const;

  // [n x input_dim] features and labels for a split.
  DenseArray features(Split s) const;
  std::vector<int> labels(Split s) const;

  // Throws SchemaError on shape/label/split violations.
  void validate(std::size_t vocab_size) const;

  friend bool operator==(const DomainDataset&, const DomainDataset&) = default;
};

enum class Suite { LargeGap, SmallGap, PretrainMix };

const char* suite_name(Suite s);
Suite parse_suite(const std::string& name);

struct GeneratorSpec {
  Suite suite = Suite::LargeGap;
  int num_domains = 4;
  int samples_per_domain = 1000;
  // Domain mean-shift magnitude in units of the per-dimension noise sigma.
  double gap_parameter = 20.0;
  // Per-domain rotation angle in radians (large gap), or the suite-wide
  // rotation of the shared problem (small gap).
  double rotation = 1.5707963267948966;
  std::uint64_t seed = 0;

  int input_dim = 32;
  int num_classes = 16;
  double noise = 1.0;
  // Scale of the class prototypes relative to the noise.
  double class_separation = 2.0;
  double train_fraction = 0.6;
  double val_fraction = 0.1;

  static GeneratorSpec defaults(Suite suite);
  void validate() const;
};

// Domains of the requested suite. Suites generated from the same seed share
// their class prototypes, so a pretrain mixture and a continual suite with
// equal seeds describe the same label space.
std::vector<DomainDataset> generate_suite(const GeneratorSpec& spec);

// Concatenation of several datasets; split indices are remapped.
DomainDataset concatenate(std::span<const DomainDataset> parts, std::string name);

struct IngestSchema {
  std::size_t feature_dim = 0;
  std::size_t vocab_size = 0;
};

DomainDataset ingest_jsonl(const std::filesystem::path& path, const IngestSchema& schema);
void export_jsonl(const DomainDataset& dataset, const std::filesystem::path& path);

}  // namespace dam
