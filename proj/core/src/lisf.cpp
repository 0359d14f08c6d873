// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "avf/lisf.hpp"

namespace avf {

template <typename T>
PyramidLayerParams<T> PyramidLayerParams<T>::init(std::size_t channels, std::size_t heads, Rng& rng) {
  PyramidLayerParams p;
  p.sa_audio = AttentionBlockParams<T>::init(channels, heads, rng);
  p.sa_visual = AttentionBlockParams<T>::init(channels, heads, rng);
  p.cma = AttentionBlockParams<T>::init(channels, heads, rng);
  p.gate_audio = GateParams<T>::init(channels, rng);
  p.gate_visual = GateParams<T>::init(channels, rng);
  p.temporal_audio = DilatedResidualParams<T>::init(channels, rng);
  p.temporal_visual = DilatedResidualParams<T>::init(channels, rng);
  return p;
}

template <typename T>
void PyramidLayerParams<T>::collect(const std::string& prefix, ParameterRegistry<T>& reg) {
  sa_audio.collect(prefix + ".sa_audio", reg);
  sa_visual.collect(prefix + ".sa_visual", reg);
  cma.collect(prefix + ".cma", reg);
  gate_audio.collect(prefix + ".gate_audio", reg);
  gate_visual.collect(prefix + ".gate_visual", reg);
  temporal_audio.collect(prefix + ".temporal_audio", reg);
  temporal_visual.collect(prefix + ".temporal_visual", reg);
}

template <typename T>
SelectiveIntegrationParams<T> SelectiveIntegrationParams<T>::init(std::size_t channels, std::size_t layers, bool shared,
                                                                  Rng& rng) {
  if (layers == 0) throw ConfigError("pyramid depth must be at least 1");
  SelectiveIntegrationParams p;
  p.shared_projection = shared;
  const std::size_t n = shared ? 1 : layers;
  for (std::size_t l = 0; l < n; ++l) {
    p.w_a.push_back(xavier<T>({channels, 1}, channels, 1, rng));
    p.b_a.push_back(zeros<T>({1}));
  }
  p.w_q = xavier<T>({1}, 1, 1, rng);
  p.w_k = xavier<T>({1}, 1, 1, rng);
  p.w_v = xavier<T>({1}, 1, 1, rng);
  return p;
}

template <typename T>
void SelectiveIntegrationParams<T>::collect(const std::string& prefix, ParameterRegistry<T>& reg) {
  for (std::size_t l = 0; l < w_a.size(); ++l) {
    reg.add(prefix + ".w_a" + std::to_string(l), w_a[l]);
    reg.add(prefix + ".b_a" + std::to_string(l), b_a[l]);
  }
  reg.add(prefix + ".w_q", w_q);
  reg.add(prefix + ".w_k", w_k);
  reg.add(prefix + ".w_v", w_v);
}

template <typename T>
LisfParams<T> LisfParams<T>::init(std::size_t channels, std::size_t heads, std::size_t depth, WindowSpec window,
                                  bool shared_projection, Rng& rng) {
  if (depth == 0) throw ConfigError("pyramid depth must be at least 1");
  LisfParams p;
  p.window = window;
  for (std::size_t l = 0; l < depth; ++l) p.layers.push_back(PyramidLayerParams<T>::init(channels, heads, rng));
  p.select = SelectiveIntegrationParams<T>::init(channels, depth, shared_projection, rng);
  return p;
}

template <typename T>
void LisfParams<T>::collect(const std::string& prefix, ParameterRegistry<T>& reg) {
  for (std::size_t l = 0; l < layers.size(); ++l) layers[l].collect(prefix + ".layer" + std::to_string(l), reg);
  select.collect(prefix + ".select", reg);
}

template <typename T>
std::pair<PyramidStack<T>, PyramidStack<T>> pyramid_forward(Var<T> audio, Var<T> visual, WindowSpec w,
                                                            std::span<PyramidLayerParams<T>> layers) {
  if (layers.empty()) throw ConfigError("pyramid depth must be at least 1");
  if (audio.shape() != visual.shape()) {
    throw DimensionError("pyramid: audio " + shape_str(audio.shape()) + " vs visual " + shape_str(visual.shape()));
  }
  PyramidStack<T> a_stack{Modality::audio, {}};
  PyramidStack<T> v_stack{Modality::visual, {}};
  Var<T> a = audio;
  Var<T> v = visual;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    PyramidLayerParams<T>& p = layers[i];
    Var<T> a_sa = sa_block(a, w, p.sa_audio);
    Var<T> v_sa = sa_block(v, w, p.sa_visual);
    Var<T> a_cma = cma_block(a, v, w, p.cma);
    Var<T> v_cma = cma_block(v, a, w, p.cma);
    Var<T> a_fused = gated_parallel_fusion(a_sa, a_cma, p.gate_audio);
    Var<T> v_fused = gated_parallel_fusion(v_sa, v_cma, p.gate_visual);
    a = dilated_residual_block(a_fused, p.temporal_audio, pyramid_dilation(i));
    v = dilated_residual_block(v_fused, p.temporal_visual, pyramid_dilation(i));
    a_stack.layers.push_back(a);
    v_stack.layers.push_back(v);
  }
  return {std::move(a_stack), std::move(v_stack)};
}

template <typename T>
Var<T> layer_weights(const PyramidStack<T>& stack, SelectiveIntegrationParams<T>& p) {
  if (stack.layers.empty()) throw ContractError("selective integration: empty pyramid stack");
  if (!p.shared_projection && p.w_a.size() != stack.depth()) {
    throw ContractError("selective integration: " + std::to_string(p.w_a.size()) + " layer projections for a stack of depth " +
                        std::to_string(stack.depth()));
  }
  Tape<T>& tape = stack.layers.front().tape();
  std::vector<Var<T>> scores;
  scores.reserve(stack.depth());
  for (std::size_t l = 0; l < stack.depth(); ++l) {
    const std::size_t k = p.shared_projection ? 0 : l;
    scores.push_back(linear(stack.layers[l], tape.param(p.w_a[k]), tape.param(p.b_a[k])));
  }
  return sigmoid(stack.depth() == 1 ? scores.front() : concat(std::span<const Var<T>>(scores), 1));
}

template <typename T>
Var<T> modulate_layer_weights(Var<T> own, Var<T> other, SelectiveIntegrationParams<T>& p) {
  if (own.shape() != other.shape() || own.shape().size() != 2) {
    throw ContractError("layer weight attention: " + shape_str(own.shape()) + " vs " + shape_str(other.shape()));
  }
  Tape<T>& tape = own.tape();
  const std::size_t s = own.shape()[0];
  const std::size_t depth = own.shape()[1];
  // Tokens are the L layers of one snippet; width 1, so the scale 1/sqrt(d_k) is 1.
  Var<T> q = reshape(mul(own, tape.param(p.w_q)), Shape{s, depth, 1});
  Var<T> k = reshape(mul(other, tape.param(p.w_k)), Shape{s, 1, depth});
  Var<T> v = reshape(mul(other, tape.param(p.w_v)), Shape{s, depth, 1});
  Var<T> probs = softmax(bmm(q, k), 2);
  return reshape(bmm(probs, v), Shape{s, depth});
}

template <typename T>
Var<T> weighted_layer_sum(const PyramidStack<T>& pyramid, Var<T> weights) {
  if (pyramid.layers.empty()) throw ContractError("weighted sum: empty pyramid stack");
  const Shape& fs = pyramid.layers.front().shape();
  const std::size_t s = fs[0], c = fs[1], depth = pyramid.depth();
  if (weights.shape() != Shape{s, depth}) {
    throw ContractError("weighted sum: weights " + shape_str(weights.shape()) + " for stack of depth " +
                        std::to_string(depth) + " over " + std::to_string(s) + " snippets");
  }
  Var<T> layers = stack(std::span<const Var<T>>(pyramid.layers), 1);  // [s x L x C]
  return reshape(bmm(reshape(weights, Shape{s, 1, depth}), layers), Shape{s, c});
}

template <typename T>
Var<T> selective_integration(const PyramidStack<T>& own, const PyramidStack<T>& other, SelectiveIntegrationParams<T>& p) {
  if (own.depth() != other.depth()) {
    throw ContractError("selective integration: stack depths differ (" + std::to_string(own.depth()) + " vs " +
                        std::to_string(other.depth()) + ")");
  }
  for (std::size_t l = 0; l < own.depth(); ++l) {
    if (own.layers[l].shape() != other.layers[l].shape() || own.layers[l].shape() != own.layers[0].shape()) {
      throw ContractError("selective integration: pyramid layer shapes differ");
    }
  }
  Var<T> e1_own = layer_weights(own, p);
  Var<T> e1_other = layer_weights(other, p);
  return weighted_layer_sum(own, modulate_layer_weights(e1_own, e1_other, p));
}

template <typename T>
LisfOutput<T> lisf_forward(Var<T> audio, Var<T> visual, LisfParams<T>& p) {
  auto [a_stack, v_stack] = pyramid_forward(audio, visual, p.window, std::span<PyramidLayerParams<T>>(p.layers));
  LisfOutput<T> out;
  out.audio = selective_integration(a_stack, v_stack, p.select);
  out.visual = selective_integration(v_stack, a_stack, p.select);
  out.audio_stack = std::move(a_stack);
  out.visual_stack = std::move(v_stack);
  return out;
}

#define AVF_INSTANTIATE_LISF(T)                                                                              \
  template struct PyramidLayerParams<T>;                                                                     \
  template struct SelectiveIntegrationParams<T>;                                                             \
  template struct LisfParams<T>;                                                                             \
  template std::pair<PyramidStack<T>, PyramidStack<T>> pyramid_forward(Var<T>, Var<T>, WindowSpec,           \
                                                                       std::span<PyramidLayerParams<T>>);    \
  template Var<T> layer_weights(const PyramidStack<T>&, SelectiveIntegrationParams<T>&);                     \
  template Var<T> modulate_layer_weights(Var<T>, Var<T>, SelectiveIntegrationParams<T>&);                    \
  template Var<T> weighted_layer_sum(const PyramidStack<T>&, Var<T>);                                        \
  template Var<T> selective_integration(const PyramidStack<T>&, const PyramidStack<T>&,                      \
                                        SelectiveIntegrationParams<T>&);                                     \
  template LisfOutput<T> lisf_forward(Var<T>, Var<T>, LisfParams<T>&);

AVF_INSTANTIATE_LISF(float)
AVF_INSTANTIATE_LISF(double)

}  // namespace avf
