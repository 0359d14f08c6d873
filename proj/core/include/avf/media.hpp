// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "avf/rng.hpp"
#include "avf/tensor.hpp"

namespace avf {

/// Frames in [0, 1], shape [frames x H x W x 3].
struct VideoClip {
  Tensor<float> frames;
  double fps = 8.0;

  std::size_t frame_count() const { return frames.dim(0); }
  std::size_t height() const { return frames.dim(1); }
  std::size_t width() const { return frames.dim(2); }
};

/// Mono waveform in [-1, 1].
struct AudioTrack {
  std::vector<float> samples;
  double sample_rate = 44100.0;
};

struct SnippetSpec {
  std::size_t snippets = 4;            // s
  std::size_t frames_per_snippet = 2;  // T
  std::size_t crop = 16;
};

/// Which frames and which window a snippet sampler reads.
struct FrameSelection {
  std::vector<std::size_t> frames;  // s*T source frame indices, snippet-major
  std::size_t top = 0, left = 0;
  bool flip = false;
};

/// Splits the clip into s equal segments and takes T consecutive frames from
/// each: a random run in train mode, the centred run in eval mode. Train mode
/// also draws a random crop origin and a horizontal flip; eval mode centre
/// crops. Clips shorter than s*T are looped (index modulo frame count), so
/// indices increase strictly only when the clip is long enough.
FrameSelection select_frames(std::size_t total_frames, std::size_t height, std::size_t width, const SnippetSpec& spec,
                             bool train, Rng& rng);

/// Applies a selection: [s*T x crop x crop x 3].
Tensor<float> gather_frames(const VideoClip& clip, const FrameSelection& sel, std::size_t crop);

/// The s snippets, each [T x crop x crop x 3].
std::vector<Tensor<float>> sample_video_snippets(const VideoClip& clip, const SnippetSpec& spec, bool train, Rng& rng);

}  // namespace avf
