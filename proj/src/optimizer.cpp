// SPDX-License-Identifier: Apache-2.0
#include "dam/optimizer.hpp"

#include <cmath>

#include "dam/error.hpp"

namespace dam {

double LinearSchedule::at(std::size_t step) const {
  if (step == 0) return 0.0;
  if (warmup_steps > 0 && step <= warmup_steps) {
    return peak * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  if (total_steps <= warmup_steps) return peak;
  if (step >= total_steps) return 0.0;
  const double remaining = static_cast<double>(total_steps - step);
  return peak * remaining / static_cast<double>(total_steps - warmup_steps);
}

std::set<std::string> all_names(const ParameterBundle& params) {
  std::set<std::string> names;
  for (const auto& [name, _] : params.entries()) names.insert(name);
  return names;
}

AdamOptimizer::AdamOptimizer(const ParameterBundle& params, std::set<std::string> trainable,
                             LinearSchedule schedule, AdamHyper hyper)
    : trainable_(std::move(trainable)) {
  state_.schedule = schedule;
  state_.hyper = hyper;
  for (const auto& name : trainable_) {
    const auto& p = params.get(name);
    state_.first_moment.emplace(name, DenseArray::zeros(p.shape()));
    state_.second_moment.emplace(name, DenseArray::zeros(p.shape()));
  }
}

void AdamOptimizer::step(ParameterBundle& params, const GradientMap& grads) {
  if (grads.size() != trainable_.size()) {
    throw ContractError("optimizer_step: gradients must cover exactly the trainable parameters");
  }
  for (const auto& [name, g] : grads) {
    if (!trainable_.count(name)) throw ContractError("optimizer_step: gradient for non-trainable '" + name + "'");
    if (g.shape() != params.get(name).shape()) {
      throw ContractError("optimizer_step: gradient shape mismatch for '" + name + "'");
    }
  }

  ++state_.step;
  const double lr = state_.schedule.total_steps ? state_.schedule.at(state_.step) : state_.schedule.peak;
  const auto& h = state_.hyper;
  const double t = static_cast<double>(state_.step);
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);

  for (const auto& [name, g] : grads) {
    auto p = params.get_mutable(name).data();
    auto m = state_.first_moment.at(name).data();
    auto v = state_.second_moment.at(name).data();
    auto gv = g.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = gv[i];
      m[i] = static_cast<float>(h.beta1 * m[i] + (1.0 - h.beta1) * gi);
      v[i] = static_cast<float>(h.beta2 * v[i] + (1.0 - h.beta2) * gi * gi);
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] = static_cast<float>(p[i] - lr * mhat / (std::sqrt(vhat) + h.epsilon));
    }
  }
}

}  // namespace dam
