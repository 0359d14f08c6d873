// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

#include "avf/autograd.hpp"
#include "avf/parameters.hpp"

namespace avf {

/// Visual stand-in: conv 3->8 (k3, s2, p1), ReLU, conv 8->16 (k3, s2, p1),
/// ReLU, mean over time and space of each snippet, linear 16 -> C.
template <typename T>
struct VisualStubParams {
  Parameter<T> conv1, bias1, conv2, bias2, proj, proj_bias;

  static VisualStubParams init(std::size_t channels, Rng& rng);
  void collect(const std::string& prefix, ParameterRegistry<T>& reg);
};

/// Audio stand-in: conv1d n_mfcc->16 (k3, s1, p1) along time, ReLU, mean
/// over time, linear 16 -> C.
template <typename T>
struct AudioStubParams {
  Parameter<T> conv, bias, proj, proj_bias;

  static AudioStubParams init(std::size_t n_mfcc, std::size_t channels, Rng& rng);
  void collect(const std::string& prefix, ParameterRegistry<T>& reg);
};

/// frames: [s*T x h x w x 3], snippet-major. Returns F_v, [s x C].
template <typename T>
Var<T> encode_visual(Var<T> frames, std::size_t snippets, VisualStubParams<T>& p);

/// chunks: [s x q/s x n_mfcc]. Returns F_a, [s x C].
template <typename T>
Var<T> encode_audio(Var<T> chunks, AudioStubParams<T>& p);

}  // namespace avf
