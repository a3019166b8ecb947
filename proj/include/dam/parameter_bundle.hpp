// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dam/tensor.hpp"

namespace dam {

using ShapeSignature = std::vector<std::pair<std::string, std::vector<std::size_t>>>;

// Named collection of dense arrays in insertion order. The unit of merging:
// two bundles with equal shape signatures combine element-wise.
class ParameterBundle {
 public:
  void insert(std::string name, DenseArray value);
  // Replace an existing entry; the new value must keep the shape.
  void assign(const std::string& name, DenseArray value);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const DenseArray& get(const std::string& name) const;
  DenseArray& get_mutable(const std::string& name);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t num_elements() const noexcept;

  const std::vector<std::pair<std::string, DenseArray>>& entries() const noexcept { return entries_; }
  std::vector<std::pair<std::string, DenseArray>>& entries() noexcept { return entries_; }

  ShapeSignature shape_signature() const;
  std::uint64_t checksum() const;

  friend bool operator==(const ParameterBundle& a, const ParameterBundle& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<std::pair<std::string, DenseArray>> entries_;
  std::map<std::string, std::size_t> index_;
};

using GradientMap = std::map<std::string, DenseArray>;

}  // namespace dam
