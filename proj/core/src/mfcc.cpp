// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "avf/mfcc.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>

#include "avf/errors.hpp"

namespace avf {

namespace {

constexpr double kLinearStep = 200.0 / 3.0;  // Hz per mel below 1 kHz
constexpr double kLogStartHz = 1000.0;
constexpr double kLogStartMel = kLogStartHz / kLinearStep;  // 15
const double kLogStep = std::log(6.4) / 27.0;

struct FftwPlan {
  std::size_t n;
  double* in;
  fftw_complex* out;
  fftw_plan plan;

  explicit FftwPlan(std::size_t n_fft) : n(n_fft) {
    in = fftw_alloc_real(n);
    out = fftw_alloc_complex(n / 2 + 1);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  }
  ~FftwPlan() {
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
  FftwPlan(const FftwPlan&) = delete;
  FftwPlan& operator=(const FftwPlan&) = delete;
};

void validate(const MfccConfig& cfg) {
  if (cfg.n_fft < 2 || cfg.n_fft % 2 != 0) throw ConfigError("n_fft must be even and >= 2");
  if (cfg.hop == 0 || cfg.n_mels == 0 || cfg.n_coeffs == 0) throw ConfigError("hop, n_mels and n_coeffs must be positive");
  if (cfg.n_coeffs > cfg.n_mels) throw ConfigError("n_coeffs exceeds n_mels");
  if (!(cfg.log_floor > 0)) throw ConfigError("log floor must be positive");
}

}  // namespace

double hz_to_mel(double hz) {
  return hz < kLogStartHz ? hz / kLinearStep : kLogStartMel + std::log(hz / kLogStartHz) / kLogStep;
}

double mel_to_hz(double mel) {
  return mel < kLogStartMel ? mel * kLinearStep : kLogStartHz * std::exp(kLogStep * (mel - kLogStartMel));
}

Tensor<double> mel_filterbank(double sample_rate, const MfccConfig& cfg) {
  validate(cfg);
  const double fmax = cfg.fmax > 0 ? cfg.fmax : sample_rate / 2;
  if (!(sample_rate > 0) || cfg.fmin < 0 || fmax <= cfg.fmin) throw ConfigError("bad mel frequency range");
  const std::size_t bins = cfg.n_fft / 2 + 1;
  const std::size_t m = cfg.n_mels;
  std::vector<double> edges(m + 2);
  const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(fmax);
  for (std::size_t i = 0; i < m + 2; ++i) edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(m + 1));
  Tensor<double> fb(Shape{m, bins});
  for (std::size_t i = 0; i < m; ++i) {
    const double left = edges[i], centre = edges[i + 1], right = edges[i + 2];
    const double norm = 2.0 / (right - left);
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = sample_rate / 2 * static_cast<double>(k) / static_cast<double>(bins - 1);
      const double rise = (f - left) / (centre - left);
      const double fall = (right - f) / (right - centre);
      fb[i * bins + k] = norm * std::max(0.0, std::min(rise, fall));
    }
  }
  return fb;
}

std::size_t frame_count(std::size_t length, const MfccConfig& cfg) { return 1 + length / cfg.hop; }

Tensor<double> power_spectrogram(std::span<const float> samples, const MfccConfig& cfg) {
  validate(cfg);
  if (samples.size() < cfg.n_fft) {
    throw InputError("waveform of " + std::to_string(samples.size()) + " samples is shorter than one frame (" +
                     std::to_string(cfg.n_fft) + ")");
  }
  const std::size_t n = cfg.n_fft, half = n / 2, bins = half + 1;
  const std::size_t frames = frame_count(samples.size(), cfg);
  std::vector<double> window(n);
  for (std::size_t i = 0; i < n; ++i) window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  FftwPlan fft(n);
  Tensor<double> out(Shape{frames, bins});
  const auto len = static_cast<std::ptrdiff_t>(samples.size());
  for (std::size_t t = 0; t < frames; ++t) {
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t * cfg.hop) - static_cast<std::ptrdiff_t>(half);
    for (std::size_t i = 0; i < n; ++i) {
      const std::ptrdiff_t j = start + static_cast<std::ptrdiff_t>(i);
      fft.in[i] = (j >= 0 && j < len) ? window[i] * static_cast<double>(samples[static_cast<std::size_t>(j)]) : 0.0;
    }
    fftw_execute(fft.plan);
    for (std::size_t k = 0; k < bins; ++k) out[t * bins + k] = fft.out[k][0] * fft.out[k][0] + fft.out[k][1] * fft.out[k][1];
  }
  return out;
}

Tensor<double> mel_spectrogram(const AudioTrack& a, const MfccConfig& cfg) {
  if (a.samples.empty()) throw InputError("empty waveform");
  const Tensor<double> power = power_spectrogram(a.samples, cfg);
  const Tensor<double> fb = mel_filterbank(a.sample_rate, cfg);
  const std::size_t frames = power.dim(0), bins = power.dim(1), m = cfg.n_mels;
  // Each triangle touches a short run of bins; skip the zeros.
  std::vector<std::pair<std::size_t, std::size_t>> support(m, {0, 0});
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t lo = bins, hi = 0;
    for (std::size_t k = 0; k < bins; ++k)
      if (fb[i * bins + k] != 0.0) {
        lo = std::min(lo, k);
        hi = k + 1;
      }
    if (lo < hi) support[i] = {lo, hi};
  }
  Tensor<double> mel(Shape{frames, m});
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0;
      for (std::size_t k = support[i].first; k < support[i].second; ++k) acc += fb[i * bins + k] * power[t * bins + k];
      mel[t * m + i] = acc;
    }
  return mel;
}

Tensor<float> mfcc(const AudioTrack& a, const MfccConfig& cfg) {
  const Tensor<double> mel = mel_spectrogram(a, cfg);
  const std::size_t frames = mel.dim(0), m = cfg.n_mels, k = cfg.n_coeffs;
  // Orthonormal DCT-II basis, [k x m].
  std::vector<double> basis(k * m);
  for (std::size_t c = 0; c < k; ++c) {
    const double scale = std::sqrt((c == 0 ? 1.0 : 2.0) / static_cast<double>(m));
    for (std::size_t i = 0; i < m; ++i)
      basis[c * m + i] = scale * std::cos(std::numbers::pi * static_cast<double>(c) * (2.0 * static_cast<double>(i) + 1) /
                                          (2.0 * static_cast<double>(m)));
  }
  Tensor<float> out(Shape{frames, k});
  std::vector<double> db(m);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < m; ++i) db[i] = 10.0 * std::log10(std::max(mel[t * m + i], cfg.log_floor));
    for (std::size_t c = 0; c < k; ++c) {
      double acc = 0;
      for (std::size_t i = 0; i < m; ++i) acc += basis[c * m + i] * db[i];
      out[t * k + c] = static_cast<float>(acc);
    }
  }
  return out;
}

Tensor<float> fit_frames(const Tensor<float>& m, std::size_t q) {
  if (q == 0) throw ConfigError("audio crop length q must be positive");
  if (m.rank() != 2) throw DimensionError("fit_frames expects [frames x k], got " + shape_str(m.shape()));
  const std::size_t frames = m.dim(0), k = m.dim(1);
  Tensor<float> out(Shape{q, k});
  if (frames >= q) {
    const std::size_t off = (frames - q) / 2;
    std::copy_n(&m[off * k], q * k, &out[0]);
  } else {
    const std::size_t pad = (q - frames) / 2;  // extra frame, if any, goes to the end
    std::copy_n(&m[0], frames * k, &out[pad * k]);
  }
  return out;
}

std::vector<Tensor<float>> chunk_audio(const Tensor<float>& m, std::size_t q, std::size_t s) {
  if (q == 0 || s == 0 || q % s != 0) {
    throw ConfigError("q (" + std::to_string(q) + ") must be a positive multiple of s (" + std::to_string(s) + ")");
  }
  const Tensor<float> fitted = fit_frames(m, q);
  const std::size_t k = fitted.dim(1), len = q / s;
  std::vector<Tensor<float>> out;
  for (std::size_t i = 0; i < s; ++i) {
    std::vector<float> v(&fitted[i * len * k], &fitted[i * len * k] + len * k);
    out.emplace_back(Shape{len, k}, std::move(v));
  }
  return out;
}

}  // namespace avf
