// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "avf/attention.hpp"

namespace avf {

enum class Modality { audio, visual };

/// Per-snippet features of one modality, [s x C].
template <typename T>
struct ModalityFeatures {
  Modality modality;
  Var<T> features;
};

/// The L retained pyramid outputs of one modality, shallow to deep, each [s x C].
template <typename T>
struct PyramidStack {
  Modality modality = Modality::audio;
  std::vector<Var<T>> layers;

  std::size_t depth() const { return layers.size(); }
};

/// One attentive pyramid layer. Each modality has its own SA block, gate and
/// temporal block; the CMA block is a single parameter set used for both the
/// audio->visual and the visual->audio direction.
template <typename T>
struct PyramidLayerParams {
  AttentionBlockParams<T> sa_audio, sa_visual, cma;
  GateParams<T> gate_audio, gate_visual;
  DilatedResidualParams<T> temporal_audio, temporal_visual;

  static PyramidLayerParams init(std::size_t channels, std::size_t heads, Rng& rng);
  void collect(const std::string& prefix, ParameterRegistry<T>& reg);
};

/// Weights of the selective integration layer.
///
/// `w_a[l]` ([C x 1]) and `b_a[l]` ([1]) score pyramid layer l per snippet;
/// with a shared projection there is a single entry used for every layer.
/// `w_q`, `w_k`, `w_v` are the 1 x 1 projections of the single-head,
/// unit-width cross-modal attention that modulates those scores. One
/// instance serves both modalities.
template <typename T>
struct SelectiveIntegrationParams {
  bool shared_projection = false;
  std::vector<Parameter<T>> w_a, b_a;
  Parameter<T> w_q, w_k, w_v;

  static SelectiveIntegrationParams init(std::size_t channels, std::size_t layers, bool shared, Rng& rng);
  void collect(const std::string& prefix, ParameterRegistry<T>& reg);
};

template <typename T>
struct LisfParams {
  WindowSpec window;
  std::vector<PyramidLayerParams<T>> layers;
  SelectiveIntegrationParams<T> select;

  static LisfParams init(std::size_t channels, std::size_t heads, std::size_t depth, WindowSpec window,
                         bool shared_projection, Rng& rng);
  void collect(const std::string& prefix, ParameterRegistry<T>& reg);
};

/// Dilation of pyramid layer `index`: 1, 2, 4, ...
constexpr std::size_t pyramid_dilation(std::size_t index) { return std::size_t{1} << index; }

/// Runs the pyramid layers in sequence. Each layer computes SA and CMA in
/// parallel per modality, fuses them with the channel gates, applies the
/// dilated residual block and retains the result.
template <typename T>
std::pair<PyramidStack<T>, PyramidStack<T>> pyramid_forward(Var<T> audio, Var<T> visual, WindowSpec w,
                                                            std::span<PyramidLayerParams<T>> layers);

/// E1 = sigmoid(W_a F^l + b_a) per snippet and layer, shape [s x L], in (0, 1).
template <typename T>
Var<T> layer_weights(const PyramidStack<T>& stack, SelectiveIntegrationParams<T>& p);

/// Cross-modal attention across the layer axis: for every snippet, L
/// one-dimensional tokens with queries from `own` and keys/values from
/// `other`. Returns the modulated weights, [s x L].
template <typename T>
Var<T> modulate_layer_weights(Var<T> own, Var<T> other, SelectiveIntegrationParams<T>& p);

/// sum_l weights[:, l] * F^l, shape [s x C].
template <typename T>
Var<T> weighted_layer_sum(const PyramidStack<T>& stack, Var<T> weights);

/// E2 for modality `own`, given both pyramid stacks.
template <typename T>
Var<T> selective_integration(const PyramidStack<T>& own, const PyramidStack<T>& other, SelectiveIntegrationParams<T>& p);

template <typename T>
struct LisfOutput {
  PyramidStack<T> audio_stack, visual_stack;
  Var<T> audio, visual;  // E2 per modality, [s x C]
};

template <typename T>
LisfOutput<T> lisf_forward(Var<T> audio, Var<T> visual, LisfParams<T>& p);

}  // namespace avf
