// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "avf/media.hpp"

namespace avf {

struct Sample {
  std::string id;
  std::size_t label = 0;
  VideoClip video;
  AudioTrack audio;
};

/// Class-conditional audio-visual clips. Video frames carry a per-class colour
/// tint and a drifting stripe pattern (orientation and frequency depend on
/// the class); audio carries a per-class pair of tones. Gaussian noise is
/// added to both. `signal_strength` scales every class-dependent component;
/// at 0 the clips are pure noise.
struct SynthConfig {
  std::size_t n_per_class = 20;
  std::size_t num_classes = 6;
  std::uint64_t seed = 7;
  std::size_t frames = 16;
  std::size_t height = 20;
  std::size_t width = 20;
  double fps = 8.0;
  double sample_rate = 44100.0;
  double audio_seconds = 1.5;
  double signal_strength = 1.0;
  double video_noise = 0.15;
  double audio_noise = 0.1;

  void validate() const;
  std::size_t size() const { return n_per_class * num_classes; }
};

void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);

/// Sample `index` of the dataset (class-major order: label = index / n_per_class).
/// Each sample draws from its own seed derived from (seed, index), so any
/// sample can be regenerated alone.
Sample synth_sample(const SynthConfig& cfg, std::size_t index);

std::vector<Sample> synth_dataset(const SynthConfig& cfg);

}  // namespace avf
