// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "avf/attention.hpp"

namespace avf {

/// Final fusion of the two pooled modality vectors.
enum class FusionStrategy { mid_concat, gated, ew_multiply, neural, sum };

inline constexpr FusionStrategy kAllFusionStrategies[] = {FusionStrategy::mid_concat, FusionStrategy::gated,
                                                         FusionStrategy::ew_multiply, FusionStrategy::neural,
                                                         FusionStrategy::sum};

std::string_view to_string(FusionStrategy s);
/// Accepts "MidConcat", "Gated", "EWMultiply", "Neural", "Sum" (case-insensitive).
std::optional<FusionStrategy> parse_fusion_strategy(std::string_view name);

/// Unrestricted cross-modal attention (W_q, W_k, W_v and the head-concat
/// projection W_2 held as attn.w_o) followed by the W_g, b_g projection.
/// Shared by both directions.
template <typename T>
struct GlobalFusionParams {
  AttentionParams<T> cma;
  Parameter<T> w_g, b_g;

  static GlobalFusionParams init(std::size_t channels, std::size_t heads, Rng& rng);
  void collect(const std::string& prefix, ParameterRegistry<T>& reg);
};

/// E3 = MHA(E2_own, E2_other); E4 = mean over snippets of
/// ReLU(E3 W_g + b_g + E2_own). Returns {E4_audio, E4_visual}, each shape {C}.
template <typename T>
std::pair<Var<T>, Var<T>> global_complementary_fusion(Var<T> e2_audio, Var<T> e2_visual, GlobalFusionParams<T>& p);

/// Classification head parameters for one fusion strategy. Which tensors
/// exist depends on the strategy:
///   MidConcat    w_f [2C x K], b_f
///   Sum          w_f [C x K],  b_f                 on E4_a + E4_v
///   EWMultiply   w_f [C x K],  b_f                 on E4_a * E4_v
///   Gated        w_z [2C x 1], b_z, w_f [C x K], b_f
///                z = sigmoid([a|v] w_z + b_z), logits = (z a + (1 - z) v) w_f + b_f
///   Neural       w_h [2C x C], b_h, w_f [C x K], b_f
///                logits = ReLU([a|v] w_h + b_h) w_f + b_f
template <typename T>
struct FusionHeadParams {
  FusionStrategy strategy = FusionStrategy::mid_concat;
  Parameter<T> w_f, b_f;
  Parameter<T> w_z, b_z;
  Parameter<T> w_h, b_h;

  static FusionHeadParams init(FusionStrategy strategy, std::size_t channels, std::size_t num_classes, Rng& rng);
  void collect(const std::string& prefix, ParameterRegistry<T>& reg);
  std::size_t num_classes() const { return b_f.value.size(); }
};

/// Number of scalars in a head of the given strategy.
std::size_t fusion_head_size(FusionStrategy strategy, std::size_t channels, std::size_t num_classes);

/// Logits [1 x K] from the audio and visual E4 vectors (concatenation order:
/// audio, then visual).
template <typename T>
Var<T> fuse_head(Var<T> e4_audio, Var<T> e4_visual, FusionHeadParams<T>& p);

}  // namespace avf
