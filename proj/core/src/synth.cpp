// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "avf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "avf/errors.hpp"

namespace avf {

void SynthConfig::validate() const {
  if (n_per_class == 0) throw ConfigError("n_per_class must be positive");
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
  if (frames == 0 || height == 0 || width == 0) throw ConfigError("video dimensions must be positive");
  if (!(fps > 0) || !(sample_rate > 0) || !(audio_seconds > 0)) throw ConfigError("rates and duration must be positive");
  if (signal_strength < 0 || video_noise < 0 || audio_noise < 0) throw ConfigError("signal and noise levels must be >= 0");
}

void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = {{"n_per_class", c.n_per_class}, {"num_classes", c.num_classes},   {"seed", c.seed},
       {"frames", c.frames},           {"height", c.height},             {"width", c.width},
       {"fps", c.fps},                 {"sample_rate", c.sample_rate},   {"audio_seconds", c.audio_seconds},
       {"signal_strength", c.signal_strength}, {"video_noise", c.video_noise}, {"audio_noise", c.audio_noise}};
}

void from_json(const nlohmann::json& j, SynthConfig& c) {
  SynthConfig d;
  c.n_per_class = j.value("n_per_class", d.n_per_class);
  c.num_classes = j.value("num_classes", d.num_classes);
  c.seed = j.value("seed", d.seed);
  c.frames = j.value("frames", d.frames);
  c.height = j.value("height", d.height);
  c.width = j.value("width", d.width);
  c.fps = j.value("fps", d.fps);
  c.sample_rate = j.value("sample_rate", d.sample_rate);
  c.audio_seconds = j.value("audio_seconds", d.audio_seconds);
  c.signal_strength = j.value("signal_strength", d.signal_strength);
  c.video_noise = j.value("video_noise", d.video_noise);
  c.audio_noise = j.value("audio_noise", d.audio_noise);
}

namespace {

// Hue-spaced tint, fully saturated.
void class_tint(std::size_t c, std::size_t k, double rgb[3]) {
  const double h = 6.0 * static_cast<double>(c) / static_cast<double>(k);
  const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
  const int sector = static_cast<int>(h);
  const double table[6][3] = {{1, x, 0}, {x, 1, 0}, {0, 1, x}, {0, x, 1}, {x, 0, 1}, {1, 0, x}};
  for (int i = 0; i < 3; ++i) rgb[i] = table[sector % 6][i];
}

float clampf(double v, double lo, double hi) { return static_cast<float>(std::clamp(v, lo, hi)); }

}  // namespace

Sample synth_sample(const SynthConfig& cfg, std::size_t index) {
  cfg.validate();
  if (index >= cfg.size()) throw ConfigError("synth index " + std::to_string(index) + " out of range");
  const std::size_t label = index / cfg.n_per_class;
  Rng rng(derive_seed(cfg.seed, index, 0x5a));
  Sample s;
  char id[32];
  std::snprintf(id, sizeof id, "c%zu_%04zu", label, index % cfg.n_per_class);
  s.id = id;
  s.label = label;

  const double a = cfg.signal_strength;
  const double pi2 = 2.0 * std::numbers::pi;

  // Video.
  double tint[3];
  class_tint(label, cfg.num_classes, tint);
  const double angle = std::numbers::pi * static_cast<double>(label % 3) / 3.0;
  const double freq = 1.0 + static_cast<double>(label / 3);  // cycles across the frame
  const double phase = rng.uniform(0.0, pi2);
  const double drift = rng.uniform(0.2, 0.6);
  const double contrast = rng.uniform(0.8, 1.2);
  const std::size_t H = cfg.height, W = cfg.width;
  s.video.fps = cfg.fps;
  s.video.frames = Tensor<float>(Shape{cfg.frames, H, W, 3});
  std::size_t o = 0;
  for (std::size_t t = 0; t < cfg.frames; ++t)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        const double u = (std::cos(angle) * static_cast<double>(x) + std::sin(angle) * static_cast<double>(y)) /
                         static_cast<double>(std::max(H, W));
        const double stripe = std::sin(pi2 * freq * u + phase + drift * static_cast<double>(t));
        for (std::size_t c = 0; c < 3; ++c) {
          const double v = 0.5 + a * (0.25 * (tint[c] - 0.5) + 0.15 * contrast * stripe) + cfg.video_noise * rng.normal();
          s.video.frames[o++] = clampf(v, 0.0, 1.0);
        }
      }

  // Audio: two class tones, base ratio 2^(1/2) apart between classes.
  const double f0 = 220.0 * std::pow(2.0, static_cast<double>(label) / 2.0);
  const double f1 = 2.5 * f0;
  const double jitter = rng.uniform(0.98, 1.02);
  const double ph0 = rng.uniform(0.0, pi2), ph1 = rng.uniform(0.0, pi2);
  const auto n = static_cast<std::size_t>(cfg.audio_seconds * cfg.sample_rate);
  s.audio.sample_rate = cfg.sample_rate;
  s.audio.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double tt = static_cast<double>(i) / cfg.sample_rate;
    const double tone = 0.35 * std::sin(pi2 * f0 * jitter * tt + ph0) + 0.2 * std::sin(pi2 * f1 * jitter * tt + ph1);
    s.audio.samples[i] = clampf(a * tone + cfg.audio_noise * rng.normal(), -1.0, 1.0);
  }
  return s;
}

std::vector<Sample> synth_dataset(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<Sample> out;
  out.reserve(cfg.size());
  for (std::size_t i = 0; i < cfg.size(); ++i) out.push_back(synth_sample(cfg, i));
  return out;
}

}  // namespace avf
