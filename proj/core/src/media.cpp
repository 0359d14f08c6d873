// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "avf/media.hpp"

#include <algorithm>
#include <string>

#include "avf/errors.hpp"

namespace avf {

FrameSelection select_frames(std::size_t total, std::size_t height, std::size_t width, const SnippetSpec& spec,
                             bool train, Rng& rng) {
  if (total == 0) throw InputError("empty video clip");
  if (spec.snippets == 0 || spec.frames_per_snippet == 0 || spec.crop == 0) {
    throw ConfigError("snippet spec needs positive s, T and crop");
  }
  if (height < spec.crop || width < spec.crop) {
    throw InputError("frame " + std::to_string(height) + "x" + std::to_string(width) + " smaller than crop " +
                     std::to_string(spec.crop));
  }
  const std::size_t s = spec.snippets, t = spec.frames_per_snippet;
  // Virtual timeline: the clip itself, or the clip looped up to s*T frames.
  const std::size_t span = std::max(total, s * t);
  FrameSelection sel;
  sel.frames.reserve(s * t);
  for (std::size_t i = 0; i < s; ++i) {
    const std::size_t begin = i * span / s;
    const std::size_t len = (i + 1) * span / s - begin;  // >= T
    const std::size_t slack = len - t;
    const std::size_t start = begin + (train ? static_cast<std::size_t>(rng.below(slack + 1)) : slack / 2);
    for (std::size_t k = 0; k < t; ++k) sel.frames.push_back((start + k) % total);
  }
  if (train) {
    sel.top = static_cast<std::size_t>(rng.below(height - spec.crop + 1));
    sel.left = static_cast<std::size_t>(rng.below(width - spec.crop + 1));
    sel.flip = rng.coin();
  } else {
    sel.top = (height - spec.crop) / 2;
    sel.left = (width - spec.crop) / 2;
  }
  return sel;
}

Tensor<float> gather_frames(const VideoClip& clip, const FrameSelection& sel, std::size_t crop) {
  const std::size_t w = clip.width(), h = clip.height();
  if (sel.top + crop > h || sel.left + crop > w) throw InputError("crop window outside the frame");
  Tensor<float> out(Shape{sel.frames.size(), crop, crop, 3});
  std::size_t o = 0;
  for (std::size_t f : sel.frames) {
    if (f >= clip.frame_count()) throw InputError("frame index out of range");
    for (std::size_t y = 0; y < crop; ++y)
      for (std::size_t x = 0; x < crop; ++x) {
        const std::size_t sx = sel.left + (sel.flip ? crop - 1 - x : x);
        const float* px = &clip.frames[((f * h + sel.top + y) * w + sx) * 3];
        for (std::size_t c = 0; c < 3; ++c) out[o++] = px[c];
      }
  }
  return out;
}

std::vector<Tensor<float>> sample_video_snippets(const VideoClip& clip, const SnippetSpec& spec, bool train, Rng& rng) {
  if (clip.frames.size() == 0 || clip.frames.rank() != 4) throw InputError("empty video clip");
  const FrameSelection sel = select_frames(clip.frame_count(), clip.height(), clip.width(), spec, train, rng);
  const Tensor<float> all = gather_frames(clip, sel, spec.crop);
  const std::size_t per = spec.frames_per_snippet * spec.crop * spec.crop * 3;
  std::vector<Tensor<float>> out;
  for (std::size_t i = 0; i < spec.snippets; ++i) {
    std::vector<float> v(all.data().begin() + static_cast<std::ptrdiff_t>(i * per),
                         all.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
    out.emplace_back(Shape{spec.frames_per_snippet, spec.crop, spec.crop, 3}, std::move(v));
  }
  return out;
}

}  // namespace avf
