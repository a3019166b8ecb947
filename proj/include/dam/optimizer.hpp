// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>

#include "dam/parameter_bundle.hpp"

namespace dam {

// Linear warmup to `peak` over `warmup_steps`, then linear decay to zero at
// `total_steps`.
struct LinearSchedule {
  double peak = 1e-3;
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 0;

  // Learning rate for 1-based update number `step`.
  double at(std::size_t step) const;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  std::map<std::string, DenseArray> first_moment;
  std::map<std::string, DenseArray> second_moment;
  std::size_t step = 0;
  LinearSchedule schedule;
  AdamHyper hyper;
};

// Adam update over the trainable subset of a bundle. Entries not named in
// `trainable` are left bit-identical.
class AdamOptimizer {
 public:
  AdamOptimizer(const ParameterBundle& params, std::set<std::string> trainable, LinearSchedule schedule,
                AdamHyper hyper = {});

  void step(ParameterBundle& params, const GradientMap& grads);

  const OptimizerState& state() const noexcept { return state_; }
  const std::set<std::string>& trainable() const noexcept { return trainable_; }

 private:
  std::set<std::string> trainable_;
  OptimizerState state_;
};

// Names of every entry in a bundle.
std::set<std::string> all_names(const ParameterBundle& params);

}  // namespace dam
