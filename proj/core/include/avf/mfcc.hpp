// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "avf/media.hpp"
#include "avf/tensor.hpp"

namespace avf {

/// Framing follows the librosa defaults: centred frames (zero padding of
/// n_fft / 2 on both sides), periodic Hann window, power spectrum, Slaney mel
/// scale and area-normalised filters, 10 log10 with a floor, orthonormal
/// DCT-II.
struct MfccConfig {
  std::size_t n_fft = 2048;
  std::size_t hop = 512;
  std::size_t n_mels = 128;
  std::size_t n_coeffs = 32;
  double log_floor = 1e-10;
  double fmin = 0.0;
  double fmax = 0.0;  // 0: Nyquist
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// [n_mels x (n_fft/2 + 1)] triangular filters.
Tensor<double> mel_filterbank(double sample_rate, const MfccConfig& cfg);

/// Frames produced for `length` samples: 1 + floor(length / hop). This is
/// 1 + floor((padded - n_fft) / hop) for the centred, padded signal.
std::size_t frame_count(std::size_t length, const MfccConfig& cfg);

/// |STFT|^2, [frames x (n_fft/2 + 1)].
Tensor<double> power_spectrogram(std::span<const float> samples, const MfccConfig& cfg);

/// Mel power spectrum before the log, [frames x n_mels].
Tensor<double> mel_spectrogram(const AudioTrack& a, const MfccConfig& cfg);

/// [frames x n_coeffs].
Tensor<float> mfcc(const AudioTrack& a, const MfccConfig& cfg = {});

/// Centre-crops or zero-pads the frame axis of `m` ([frames x k]) to q, then
/// cuts it into s chunks of q / s frames.
std::vector<Tensor<float>> chunk_audio(const Tensor<float>& m, std::size_t q, std::size_t s);

/// The cropped / padded [q x k] array chunk_audio splits.
Tensor<float> fit_frames(const Tensor<float>& m, std::size_t q);

}  // namespace avf
