// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "avf/parameters.hpp"

namespace avf {

struct AdamWConfig {
  double lr = 1.5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 2e-2;

  void validate() const;
};

/// Adam with decoupled weight decay:
///   p -= lr * wd * p
///   m = b1 m + (1 - b1) g;  v = b2 v + (1 - b2) g^2
///   p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
template <typename T>
class AdamW {
 public:
  AdamW(const ParameterRegistry<T>& params, AdamWConfig cfg);

  /// One update from the gradients currently held in the parameters,
  /// multiplied by `grad_scale` first (1 / accumulated batches).
  void step(double grad_scale = 1.0);
  std::size_t steps() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  std::vector<Parameter<T>*> params_;
  std::vector<std::vector<T>> m_, v_;
  AdamWConfig cfg_;
  std::size_t t_ = 0;
};

}  // namespace avf
