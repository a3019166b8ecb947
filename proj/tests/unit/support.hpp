// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dam/backbone.hpp"
#include "dam/data.hpp"

namespace testing {

// Small pretrained backbone shared by the tests in one process.
inline const dam::Backbone& small_backbone() {
  static const dam::Backbone backbone = [] {
    auto spec = dam::GeneratorSpec::defaults(dam::Suite::PretrainMix);
    spec.samples_per_domain = 1600;
    dam::PretrainConfig pc;
    pc.epochs = 8;
    return dam::pretrain_backbone(dam::generate_suite(spec).front(), dam::BackboneConfig{}, 0, pc);
  }();
  return backbone;
}

// Three well separated domains, 300 samples each.
inline const std::vector<dam::DomainDataset>& small_large_gap() {
  static const std::vector<dam::DomainDataset> datasets = [] {
    auto spec = dam::GeneratorSpec::defaults(dam::Suite::LargeGap);
    spec.num_domains = 3;
    spec.samples_per_domain = 300;
    return dam::generate_suite(spec);
  }();
  return datasets;
}

inline dam::DenseArray random_array(std::mt19937_64& rng, std::vector<std::size_t> shape, double sd = 1.0) {
  std::normal_distribution<float> n(0.0f, static_cast<float>(sd));
  dam::DenseArray a(std::move(shape));
  for (auto& v : a.data()) v = n(rng);
  return a;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dam_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
