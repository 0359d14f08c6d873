// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "avf/encoders.hpp"

#include "avf/ops.hpp"

namespace avf {

namespace {
constexpr std::size_t kVisualMid = 8;
constexpr std::size_t kVisualOut = 16;
constexpr std::size_t kAudioOut = 16;
}  // namespace

template <typename T>
VisualStubParams<T> VisualStubParams<T>::init(std::size_t channels, Rng& rng) {
  VisualStubParams p;
  p.conv1 = xavier<T>({3, 3, 3, kVisualMid}, 9 * 3, 9 * kVisualMid, rng);
  p.bias1 = zeros<T>({kVisualMid});
  p.conv2 = xavier<T>({3, 3, kVisualMid, kVisualOut}, 9 * kVisualMid, 9 * kVisualOut, rng);
  p.bias2 = zeros<T>({kVisualOut});
  p.proj = xavier<T>({kVisualOut, channels}, kVisualOut, channels, rng);
  p.proj_bias = zeros<T>({channels});
  return p;
}

template <typename T>
void VisualStubParams<T>::collect(const std::string& prefix, ParameterRegistry<T>& reg) {
  reg.add(prefix + ".conv1", conv1);
  reg.add(prefix + ".bias1", bias1);
  reg.add(prefix + ".conv2", conv2);
  reg.add(prefix + ".bias2", bias2);
  reg.add(prefix + ".proj", proj);
  reg.add(prefix + ".proj_bias", proj_bias);
}

template <typename T>
AudioStubParams<T> AudioStubParams<T>::init(std::size_t n_mfcc, std::size_t channels, Rng& rng) {
  AudioStubParams p;
  p.conv = xavier<T>({3, n_mfcc, kAudioOut}, 3 * n_mfcc, 3 * kAudioOut, rng);
  p.bias = zeros<T>({kAudioOut});
  p.proj = xavier<T>({kAudioOut, channels}, kAudioOut, channels, rng);
  p.proj_bias = zeros<T>({channels});
  return p;
}

template <typename T>
void AudioStubParams<T>::collect(const std::string& prefix, ParameterRegistry<T>& reg) {
  reg.add(prefix + ".conv", conv);
  reg.add(prefix + ".bias", bias);
  reg.add(prefix + ".proj", proj);
  reg.add(prefix + ".proj_bias", proj_bias);
}

template <typename T>
Var<T> encode_visual(Var<T> frames, std::size_t snippets, VisualStubParams<T>& p) {
  const Shape& in = frames.shape();
  if (in.size() != 4 || in[3] != 3 || snippets == 0 || in[0] % snippets != 0) {
    throw DimensionError("visual encoder: frames " + shape_str(in) + " do not split into " + std::to_string(snippets) +
                         " RGB snippets");
  }
  Tape<T>& tape = frames.tape();
  Var<T> h = relu(conv2d(frames, tape.param(p.conv1), tape.param(p.bias1), 2, 1));
  h = relu(conv2d(h, tape.param(p.conv2), tape.param(p.bias2), 2, 1));
  const Shape& hs = h.shape();  // [s*T x h' x w' x 16]
  const std::size_t per_snippet = hs[0] / snippets * hs[1] * hs[2];
  Var<T> pooled = mean_pool(reshape(h, Shape{snippets, per_snippet, hs[3]}), 1);
  return linear(pooled, tape.param(p.proj), tape.param(p.proj_bias));
}

template <typename T>
Var<T> encode_audio(Var<T> chunks, AudioStubParams<T>& p) {
  if (chunks.shape().size() != 3) throw DimensionError("audio encoder: expected [s x frames x n_mfcc], got " + shape_str(chunks.shape()));
  Tape<T>& tape = chunks.tape();
  Var<T> h = relu(conv1d(chunks, tape.param(p.conv), tape.param(p.bias), 1, 1, 1));
  return linear(mean_pool(h, 1), tape.param(p.proj), tape.param(p.proj_bias));
}

#define AVF_INSTANTIATE_ENCODERS(T)                                          \
  template struct VisualStubParams<T>;                                       \
  template struct AudioStubParams<T>;                                        \
  template Var<T> encode_visual(Var<T>, std::size_t, VisualStubParams<T>&); \
  template Var<T> encode_audio(Var<T>, AudioStubParams<T>&);

AVF_INSTANTIATE_ENCODERS(float)
AVF_INSTANTIATE_ENCODERS(double)

}  // namespace avf
