// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "avf/autograd.hpp"
#include "avf/gradcheck.hpp"
#include "avf/parameters.hpp"
#include "avf/rng.hpp"
#include "avf/tensor.hpp"
#include "doctest.h"

namespace avf::test {

template <typename T = double>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Values in [-1,-0.1] u [0.1,1]: keeps ReLU inputs off the kink for
// finite differences.
inline Tensor<double> off_zero_tensor(Shape shape, Rng& rng) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = (rng.coin() ? 1.0 : -1.0) * rng.uniform(0.1, 1.0);
  return t;
}

template <typename T = double>
Parameter<T> random_param(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Parameter<T> p;
  p.value = random_tensor<T>(shape, rng, lo, hi);
  p.grad = Tensor<T>(std::move(shape));
  return p;
}

inline void expect_pass(const GradCheckReport& r) {
  INFO(r.unit << ": max rel err " << r.max_rel_error << " at " << r.worst_at);
  CHECK(r.values_checked > 0);
  CHECK(r.passed);
  CHECK(r.max_rel_error < 1e-4);
}

}  // namespace avf::test

namespace avf::test {

template <typename T>
std::vector<Parameter<T>*> param_ptrs(const ParameterRegistry<T>& reg) {
  std::vector<Parameter<T>*> out;
  for (const auto& e : reg.entries()) out.push_back(e.param);
  return out;
}

template <typename T>
void zero_all(const ParameterRegistry<T>& reg) {
  for (const auto& e : reg.entries()) e.param->value.fill(T(0));
}

}  // namespace avf::test
