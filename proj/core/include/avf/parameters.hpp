// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "avf/autograd.hpp"
#include "avf/rng.hpp"

namespace avf {

/// Named, ordered view of a model's parameters. Does not own them.
template <typename T>
class ParameterRegistry {
 public:
  struct Entry {
    std::string name;
    Parameter<T>* param;
  };

  void add(std::string name, Parameter<T>& p) {
    for (const Entry& e : entries_) {
      if (e.name == name) throw ContractError("duplicate parameter name '" + name + "'");
    }
    entries_.push_back({std::move(name), &p});
  }

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t count() const { return entries_.size(); }

  /// Total number of scalar values across parameters.
  std::size_t total_size() const {
    std::size_t n = 0;
    for (const Entry& e : entries_) n += e.param->size();
    return n;
  }

  Parameter<T>* find(const std::string& name) const {
    for (const Entry& e : entries_)
      if (e.name == name) return e.param;
    return nullptr;
  }

  void zero_grad() const {
    for (const Entry& e : entries_) e.param->zero_grad();
  }

 private:
  std::vector<Entry> entries_;
};

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <typename T>
Parameter<T> xavier(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor<T> t(std::move(shape));
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-a, a));
  return Parameter<T>(std::move(t));
}

template <typename T>
Parameter<T> zeros(Shape shape) {
  return Parameter<T>(Tensor<T>(std::move(shape), T(0)));
}

template <typename T>
Parameter<T> constant_param(Shape shape, T v) {
  return Parameter<T>(Tensor<T>(std::move(shape), v));
}

}  // namespace avf
