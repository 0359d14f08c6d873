// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "avf/encoders.hpp"
#include "avf/glcf.hpp"
#include "avf/lisf.hpp"
#include "avf/mfcc.hpp"
#include "avf/synth.hpp"

namespace avf {

struct ModelConfig {
  std::size_t snippets = 4;            // s
  std::size_t frames_per_snippet = 2;  // T
  std::size_t crop = 16;
  std::size_t channels = 32;  // C1 = C2
  std::size_t layers = 2;     // L
  std::size_t window = 1;     // d
  std::size_t heads = 4;
  std::size_t num_classes = 6;
  std::size_t q = 128;  // MFCC frames per clip after crop / pad
  bool shared_layer_projection = false;
  FusionStrategy strategy = FusionStrategy::mid_concat;
  MfccConfig mfcc;

  void validate() const;
  SnippetSpec snippet_spec() const { return {snippets, frames_per_snippet, crop}; }
};

template <typename T>
struct ModelOutput {
  Var<T> fused, visual, audio;  // logits, [1 x K] each
  Var<T> embedding;             // [E4_a | E4_v], [1 x 2C]
};

/// Encoder stubs -> LISF -> GLCF -> fusion head, plus one linear branch
/// classifier per modality on its E4 vector.
template <typename T>
class AvCaNet {
 public:
  AvCaNet(const ModelConfig& cfg, std::uint64_t seed);
  AvCaNet(const AvCaNet&) = delete;
  AvCaNet& operator=(const AvCaNet&) = delete;

  const ModelConfig& config() const { return cfg_; }
  /// Stable for the lifetime of the model.
  const ParameterRegistry<T>& parameters() const { return registry_; }

  /// frames: [s*T x crop x crop x 3]; audio: [s x q/s x n_mfcc].
  ModelOutput<T> forward(Tape<T>& tape, const Tensor<T>& frames, const Tensor<T>& audio);

  VisualStubParams<T> visual_stub;
  AudioStubParams<T> audio_stub;
  LisfParams<T> lisf;
  GlobalFusionParams<T> glcf;
  FusionHeadParams<T> head;
  Parameter<T> branch_visual_w, branch_visual_b, branch_audio_w, branch_audio_b;

 private:
  ModelConfig cfg_;
  ParameterRegistry<T> registry_;
};

/// A sample with its audio features computed once; video snippets are drawn
/// per use.
struct PreparedSample {
  std::string id;
  std::size_t label = 0;
  VideoClip video;
  Tensor<float> audio_chunks;  // [s x q/s x n_mfcc]
};

PreparedSample prepare_sample(const Sample& s, const ModelConfig& cfg);
std::vector<PreparedSample> prepare_samples(const std::vector<Sample>& samples, const ModelConfig& cfg);

/// [s*T x crop x crop x 3] for one pass; train mode augments from `rng`.
Tensor<float> video_input(const PreparedSample& s, const ModelConfig& cfg, bool train, Rng& rng);

}  // namespace avf
