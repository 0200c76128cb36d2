// SPDX-License-Identifier: Apache-2.0
#include "salatt/param_store.hpp"

#include <cmath>

namespace salatt {

ParamEntry& ParamStore::add(const std::string& name, Tensor value) {
  if (entries_.contains(name)) {
    throw ArgumentError("duplicate parameter name '" + name + "'");
  }
  ParamEntry entry;
  entry.grad = Tensor(value.shape());
  entry.rms = Tensor(value.shape());
  entry.value = std::move(value);
  return entries_.emplace(name, std::move(entry)).first->second;
}

ParamEntry& ParamStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ArgumentError("unknown parameter '" + name + "'");
  return it->second;
}

const ParamEntry& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ArgumentError("unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, e] : entries_) n += e.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, e] : entries_) e.grad.fill(0.0);
}

ParamStore ParamStore::snapshot() const {
  ParamStore copy;
  for (const auto& [name, e] : entries_) copy.add(name, e.value);
  return copy;
}

void ParamStore::assign_values(const ParamStore& other) {
  if (other.size() != size()) {
    throw ConfigError("parameter count mismatch: expected " + std::to_string(size()) +
                      ", found " + std::to_string(other.size()));
  }
  for (auto& [name, e] : entries_) {
    const auto& src = other.at(name);
    if (src.value.shape() != e.value.shape()) {
      throw ConfigError("parameter '" + name + "' expected shape " +
                        shape_to_string(e.value.shape()) + ", found " +
                        shape_to_string(src.value.shape()));
    }
    e.value = src.value;
  }
}

void rmsprop_step(ParamStore& store, const RmsPropConfig& config) {
  for (auto& [_, e] : store) {
    auto value = e.value.data();
    auto grad = e.grad.data();
    auto acc = e.rms.data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      acc[i] = config.decay * acc[i] + (1.0 - config.decay) * g * g;
      value[i] -= config.learning_rate * g / std::sqrt(acc[i] + config.epsilon);
      grad[i] = 0.0;
    }
  }
}

}  // namespace salatt
