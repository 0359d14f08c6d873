// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "avf/glcf.hpp"

#include <algorithm>
#include <cctype>

namespace avf {

std::string_view to_string(FusionStrategy s) {
  switch (s) {
    case FusionStrategy::mid_concat: return "MidConcat";
    case FusionStrategy::gated: return "Gated";
    case FusionStrategy::ew_multiply: return "EWMultiply";
    case FusionStrategy::neural: return "Neural";
    case FusionStrategy::sum: return "Sum";
  }
  return "?";
}

std::optional<FusionStrategy> parse_fusion_strategy(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (c == '-' || c == '_') continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  for (FusionStrategy s : kAllFusionStrategies) {
    std::string canon;
    for (char c : to_string(s)) canon.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (canon == key) return s;
  }
  return std::nullopt;
}

template <typename T>
GlobalFusionParams<T> GlobalFusionParams<T>::init(std::size_t channels, std::size_t heads, Rng& rng) {
  GlobalFusionParams p;
  p.cma = AttentionParams<T>::init(channels, heads, rng);
  p.w_g = xavier<T>({channels, channels}, channels, channels, rng);
  p.b_g = zeros<T>({channels});
  return p;
}

template <typename T>
void GlobalFusionParams<T>::collect(const std::string& prefix, ParameterRegistry<T>& reg) {
  cma.collect(prefix + ".cma", reg);
  reg.add(prefix + ".w_g", w_g);
  reg.add(prefix + ".b_g", b_g);
}

template <typename T>
std::pair<Var<T>, Var<T>> global_complementary_fusion(Var<T> e2_audio, Var<T> e2_visual, GlobalFusionParams<T>& p) {
  if (e2_audio.shape() != e2_visual.shape()) {
    throw DimensionError("global fusion: " + shape_str(e2_audio.shape()) + " vs " + shape_str(e2_visual.shape()));
  }
  Tape<T>& tape = e2_audio.tape();
  auto one_side = [&](Var<T> own, Var<T> other) {
    Var<T> e3 = multi_head_attention(own, other, p.cma, nullptr);
    Var<T> projected = linear(e3, tape.param(p.w_g), tape.param(p.b_g));
    return mean_pool(relu(add(projected, own)), 0);
  };
  Var<T> e4_audio = one_side(e2_audio, e2_visual);
  Var<T> e4_visual = one_side(e2_visual, e2_audio);
  return {e4_audio, e4_visual};
}

std::size_t fusion_head_size(FusionStrategy strategy, std::size_t c, std::size_t k) {
  switch (strategy) {
    case FusionStrategy::mid_concat: return 2 * c * k + k;
    case FusionStrategy::sum:
    case FusionStrategy::ew_multiply: return c * k + k;
    case FusionStrategy::gated: return 2 * c + 1 + c * k + k;
    case FusionStrategy::neural: return 2 * c * c + c + c * k + k;
  }
  return 0;
}

template <typename T>
FusionHeadParams<T> FusionHeadParams<T>::init(FusionStrategy strategy, std::size_t c, std::size_t k, Rng& rng) {
  if (k == 0) throw ConfigError("num_classes must be positive");
  FusionHeadParams p;
  p.strategy = strategy;
  const std::size_t in = strategy == FusionStrategy::mid_concat ? 2 * c : c;
  p.w_f = xavier<T>({in, k}, in, k, rng);
  p.b_f = zeros<T>({k});
  if (strategy == FusionStrategy::gated) {
    p.w_z = xavier<T>({2 * c, 1}, 2 * c, 1, rng);
    p.b_z = zeros<T>({1});
  }
  if (strategy == FusionStrategy::neural) {
    p.w_h = xavier<T>({2 * c, c}, 2 * c, c, rng);
    p.b_h = zeros<T>({c});
  }
  return p;
}

template <typename T>
void FusionHeadParams<T>::collect(const std::string& prefix, ParameterRegistry<T>& reg) {
  if (strategy == FusionStrategy::gated) {
    reg.add(prefix + ".w_z", w_z);
    reg.add(prefix + ".b_z", b_z);
  }
  if (strategy == FusionStrategy::neural) {
    reg.add(prefix + ".w_h", w_h);
    reg.add(prefix + ".b_h", b_h);
  }
  reg.add(prefix + ".w_f", w_f);
  reg.add(prefix + ".b_f", b_f);
}

template <typename T>
Var<T> fuse_head(Var<T> e4_audio, Var<T> e4_visual, FusionHeadParams<T>& p) {
  if (e4_audio.shape() != e4_visual.shape()) {
    throw DimensionError("fusion head: " + shape_str(e4_audio.shape()) + " vs " + shape_str(e4_visual.shape()));
  }
  Tape<T>& tape = e4_audio.tape();
  const std::size_t c = e4_audio.value().size();
  Var<T> a = reshape(e4_audio, Shape{1, c});
  Var<T> v = reshape(e4_visual, Shape{1, c});
  Var<T> w_f = tape.param(p.w_f);
  Var<T> b_f = tape.param(p.b_f);
  if (w_f.shape()[0] != (p.strategy == FusionStrategy::mid_concat ? 2 * c : c)) {
    throw DimensionError("fusion head: weight " + shape_str(w_f.shape()) + " does not fit pooled width " + std::to_string(c));
  }
  switch (p.strategy) {
    case FusionStrategy::mid_concat: return linear(concat({a, v}, 1), w_f, b_f);
    case FusionStrategy::sum: return linear(add(a, v), w_f, b_f);
    case FusionStrategy::ew_multiply: return linear(mul(a, v), w_f, b_f);
    case FusionStrategy::gated: {
      Var<T> z = sigmoid(linear(concat({a, v}, 1), tape.param(p.w_z), tape.param(p.b_z)));
      Var<T> mixed = add(mul(a, z), mul(v, affine(z, T(-1), T(1))));
      return linear(mixed, w_f, b_f);
    }
    case FusionStrategy::neural: {
      Var<T> hidden = relu(linear(concat({a, v}, 1), tape.param(p.w_h), tape.param(p.b_h)));
      return linear(hidden, w_f, b_f);
    }
  }
  throw ConfigError("unknown fusion strategy");
}

#define AVF_INSTANTIATE_GLCF(T)                                                                       \
  template struct GlobalFusionParams<T>;                                                              \
  template struct FusionHeadParams<T>;                                                                \
  template std::pair<Var<T>, Var<T>> global_complementary_fusion(Var<T>, Var<T>, GlobalFusionParams<T>&); \
  template Var<T> fuse_head(Var<T>, Var<T>, FusionHeadParams<T>&);

AVF_INSTANTIATE_GLCF(float)
AVF_INSTANTIATE_GLCF(double)

}  // namespace avf
