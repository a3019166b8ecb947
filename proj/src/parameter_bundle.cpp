// SPDX-License-Identifier: Apache-2.0
#include "dam/parameter_bundle.hpp"

#include "dam/error.hpp"

namespace dam {

void ParameterBundle::insert(std::string name, DenseArray value) {
  if (index_.count(name)) throw ContractError("ParameterBundle: duplicate name '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(value));
}

void ParameterBundle::assign(const std::string& name, DenseArray value) {
  auto& slot = get_mutable(name);
  if (slot.shape() != value.shape()) {
    throw DimensionError("ParameterBundle: '" + name + "' expects shape " + shape_string(slot.shape()) + ", got " +
                         shape_string(value.shape()));
  }
  slot = std::move(value);
}

const DenseArray& ParameterBundle::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("ParameterBundle: no entry named '" + name + "'");
  return entries_[it->second].second;
}

DenseArray& ParameterBundle::get_mutable(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("ParameterBundle: no entry named '" + name + "'");
  return entries_[it->second].second;
}

std::size_t ParameterBundle::num_elements() const noexcept {
  std::size_t n = 0;
  for (const auto& [_, a] : entries_) n += a.size();
  return n;
}

ShapeSignature ParameterBundle::shape_signature() const {
  ShapeSignature sig;
  sig.reserve(entries_.size());
  for (const auto& [name, a] : entries_) sig.emplace_back(name, a.shape());
  return sig;
}

std::uint64_t ParameterBundle::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, a] : entries_) {
    h = fnv1a(std::as_bytes(std::span(name.data(), name.size())), h);
    const std::uint64_t c = dam::checksum(a);
    h = fnv1a(std::as_bytes(std::span(&c, 1)), h);
  }
  return h;
}

}  // namespace dam
