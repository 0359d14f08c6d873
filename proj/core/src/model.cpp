// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "avf/model.hpp"

#include <cmath>

#include "avf/ops.hpp"

namespace avf {

void ModelConfig::validate() const {
  if (snippets == 0 || frames_per_snippet == 0 || crop == 0) throw ConfigError("s, T and crop must be positive");
  if (channels == 0) throw ConfigError("channels must be positive");
  if (layers == 0) throw ConfigError("pyramid layers must be >= 1");
  if (heads == 0 || channels % heads != 0) throw ConfigError("channels must be divisible by heads");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (q == 0 || q % snippets != 0) throw ConfigError("q must be a positive multiple of s");
}

template <typename T>
AvCaNet<T>::AvCaNet(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(derive_seed(seed, 0x30de1));
  const std::size_t c = cfg.channels, k = cfg.num_classes;
  visual_stub = VisualStubParams<T>::init(c, rng);
  audio_stub = AudioStubParams<T>::init(cfg.mfcc.n_coeffs, c, rng);
  lisf = LisfParams<T>::init(c, cfg.heads, cfg.layers, {cfg.window}, cfg.shared_layer_projection, rng);
  glcf = GlobalFusionParams<T>::init(c, cfg.heads, rng);
  head = FusionHeadParams<T>::init(cfg.strategy, c, k, rng);
  branch_visual_w = xavier<T>({c, k}, c, k, rng);
  branch_visual_b = zeros<T>({k});
  branch_audio_w = xavier<T>({c, k}, c, k, rng);
  branch_audio_b = zeros<T>({k});

  visual_stub.collect("visual_stub", registry_);
  audio_stub.collect("audio_stub", registry_);
  lisf.collect("lisf", registry_);
  glcf.collect("glcf", registry_);
  head.collect("head", registry_);
  registry_.add("branch_visual.w", branch_visual_w);
  registry_.add("branch_visual.b", branch_visual_b);
  registry_.add("branch_audio.w", branch_audio_w);
  registry_.add("branch_audio.b", branch_audio_b);
}

template <typename T>
ModelOutput<T> AvCaNet<T>::forward(Tape<T>& tape, const Tensor<T>& frames, const Tensor<T>& audio) {
  const std::size_t s = cfg_.snippets, c = cfg_.channels;
  if (frames.shape() != Shape{s * cfg_.frames_per_snippet, cfg_.crop, cfg_.crop, 3}) {
    throw DimensionError("model: video input " + shape_str(frames.shape()) + " does not match the configured snippets");
  }
  if (audio.shape() != Shape{s, cfg_.q / s, cfg_.mfcc.n_coeffs}) {
    throw DimensionError("model: audio input " + shape_str(audio.shape()) + " does not match the configured q / s");
  }
  Var<T> f_v = encode_visual(tape.constant(frames), s, visual_stub);
  Var<T> f_a = encode_audio(tape.constant(audio), audio_stub);
  LisfOutput<T> local = lisf_forward(f_a, f_v, lisf);
  auto [e4_a, e4_v] = global_complementary_fusion(local.audio, local.visual, glcf);
  ModelOutput<T> out;
  out.fused = fuse_head(e4_a, e4_v, head);
  out.visual = linear(reshape(e4_v, Shape{1, c}), tape.param(branch_visual_w), tape.param(branch_visual_b));
  out.audio = linear(reshape(e4_a, Shape{1, c}), tape.param(branch_audio_w), tape.param(branch_audio_b));
  out.embedding = concat({reshape(e4_a, Shape{1, c}), reshape(e4_v, Shape{1, c})}, 1);
  return out;
}

template class AvCaNet<float>;
template class AvCaNet<double>;

PreparedSample prepare_sample(const Sample& s, const ModelConfig& cfg) {
  cfg.validate();
  if (s.label >= cfg.num_classes) {
    throw InputError("sample " + s.id + " has label " + std::to_string(s.label) + " outside the " +
                     std::to_string(cfg.num_classes) + " classes");
  }
  PreparedSample p;
  p.id = s.id;
  p.label = s.label;
  p.video = s.video;
  // One mean / std over the whole cropped array: the stub has no
  // normalisation layer, and raw dB-scale coefficients run into the hundreds.
  Tensor<float> fitted = fit_frames(mfcc(s.audio, cfg.mfcc), cfg.q);
  double mean = 0, sq = 0;
  for (float v : fitted.data()) mean += v;
  mean /= static_cast<double>(fitted.size());
  for (float v : fitted.data()) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(fitted.size()));
  for (auto& v : fitted.data()) v = static_cast<float>(sd > 0 ? (v - mean) / sd : 0.0);
  // Chunking [q x k] into s contiguous runs is a reshape to [s x q/s x k].
  p.audio_chunks = fitted.reshaped({cfg.snippets, cfg.q / cfg.snippets, cfg.mfcc.n_coeffs});
  return p;
}

std::vector<PreparedSample> prepare_samples(const std::vector<Sample>& samples, const ModelConfig& cfg) {
  std::vector<PreparedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(prepare_sample(s, cfg));
  return out;
}

Tensor<float> video_input(const PreparedSample& s, const ModelConfig& cfg, bool train, Rng& rng) {
  const SnippetSpec spec = cfg.snippet_spec();
  const FrameSelection sel = select_frames(s.video.frame_count(), s.video.height(), s.video.width(), spec, train, rng);
  return gather_frames(s.video, sel, spec.crop);
}

}  // namespace avf
