// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "avf/gradcheck.hpp"

namespace avf {

struct GradientSuiteConfig {
  std::uint64_t seed = 1;
  std::size_t snippets = 4;  // s
  std::size_t channels = 8;  // C1 = C2
  std::size_t heads = 2;
  std::size_t layers = 2;  // L
  std::size_t window = 1;  // d
  GradCheckOptions options;
  bool inject_fault = false;  // adds "faulty_scale", whose backward is off by 2x
};

/// Central-difference checks at 64-bit of every differentiable op, the
/// attention blocks, gate, dilated residual, LISF, GLCF with every head,
/// the encoder stubs and the EP-CE multitask loss. One report per unit, in
/// a fixed order; inputs depend only on the seed.
std::vector<GradCheckReport> run_gradient_suite(const GradientSuiteConfig& cfg);

}  // namespace avf
