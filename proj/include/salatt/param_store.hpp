// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "salatt/tensor.hpp"

namespace salatt {

struct ParamEntry {
  Tensor value;
  Tensor grad;
  Tensor rms;  // running mean of squared gradients
};

/// Named trainable tensors with their gradient and RMSprop accumulators.
///
/// Iteration order is lexicographic by name, which fixes the checkpoint
/// layout and the order of every per-block report.
class ParamStore {
 public:
  ParamEntry& add(const std::string& name, Tensor value);

  bool contains(const std::string& name) const { return entries_.contains(name); }
  ParamEntry& at(const std::string& name);
  const ParamEntry& at(const std::string& name) const;

  std::vector<std::string> names() const;
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  /// Copies parameter values only; accumulators of the copy are zero.
  ParamStore snapshot() const;
  /// Overwrites values from `other`, which must hold the same names and shapes.
  void assign_values(const ParamStore& other);

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::map<std::string, ParamEntry> entries_;
};

struct RmsPropConfig {
  double learning_rate = 3e-4;
  double decay = 0.95;
  double epsilon = 1e-8;
};

/// acc ← decay·acc + (1−decay)·g²; θ ← θ − lr·g/√(acc+ε); then zeroes g.
void rmsprop_step(ParamStore& store, const RmsPropConfig& config);

}  // namespace salatt
