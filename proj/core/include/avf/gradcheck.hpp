// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "avf/autograd.hpp"

namespace avf {

struct GradCheckOptions {
  double step = 1e-5;       // central-difference half step
  double tolerance = 1e-4;  // max admissible relative error
  // Relative error is |a - n| / max(|a|, |n|, denom_floor); the floor keeps
  // near-zero gradients from turning rounding noise into large ratios.
  double denom_floor = 1e-3;
};

struct GradCheckReport {
  std::string unit;
  double max_rel_error = 0.0;
  std::size_t values_checked = 0;
  std::string worst_at;  // "input[i][j]" or "param[k][j]"
  bool passed = false;
};

/// Builds a scalar loss from leaf variables holding `inputs` (in order).
/// Parameters are reached by the builder itself, through tape.param().
using LossBuilder = std::function<Var<double>(Tape<double>&, std::span<const Var<double>>)>;

double relative_error(double analytic, double numeric, double floor);

/// Compares backward() gradients of every input element and every parameter
/// element against central finite differences of the same builder.
GradCheckReport grad_check(std::string unit, std::vector<Tensor<double>> inputs, std::span<Parameter<double>* const> params,
                           const LossBuilder& build, const GradCheckOptions& opts = {});

/// sum(x * R) for a fixed pseudo-random R in [-1, 1] drawn from `seed`.
/// Gives composite outputs a loss whose gradient is not degenerate (a plain
/// sum of a layer-normed row, for instance, has zero gradient).
Var<double> random_projection(Var<double> x, std::uint64_t seed);

}  // namespace avf
