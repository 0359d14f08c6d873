// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "avf/autograd.hpp"

namespace avf {

enum class Polarity { positive, neutral, negative };

std::string_view to_string(Polarity p);

/// Category -> polarity, plus the penalty coefficient of each polarity.
struct PolarityMap {
  std::vector<Polarity> polarity;
  std::array<double, 3> gamma{0.7, 0.7, 0.7};  // indexed by Polarity

  /// The six emotion categories in label order: Excitation, Fear, Neutral,
  /// Relaxation, Sadness, Tension. Positive: Excitation, Relaxation;
  /// neutral: Neutral; negative: Fear, Sadness, Tension.
  static PolarityMap six_emotions(double gamma = 0.7);
  static const std::array<std::string_view, 6>& six_emotion_names();

  std::size_t num_classes() const { return polarity.size(); }
  double gamma_of(Polarity p) const { return gamma[static_cast<std::size_t>(p)]; }
  void validate(std::size_t num_classes) const;
};

/// Mean cross-entropy of logits [N x K] against labels.
template <typename T>
Var<T> cross_entropy(Var<T> logits, std::span<const std::size_t> labels);

/// Per-sample factors 1 + gamma(ep(y)) * [ep(argmax) != ep(y)]. The
/// factor uses the coefficient of the true label's polarity.
std::vector<double> polarity_penalties(const Tensor<double>& logits, std::span<const std::size_t> labels,
                                       const PolarityMap& pm);

/// -(1/N) sum_i factor_i * log softmax(logits_i)[y_i]; the factors enter as
/// constants (no gradient through the argmax).
template <typename T>
Var<T> ep_ce_loss(Var<T> logits, std::span<const std::size_t> labels, const PolarityMap& pm);

struct BranchWeights {
  double fused = 1.0, visual = 1.0, audio = 1.0;
};

/// w_f L(fused) + w_v L(visual) + w_a L(audio), each an EP-CE loss.
template <typename T>
Var<T> multitask_loss(Var<T> fused, Var<T> visual, Var<T> audio, std::span<const std::size_t> labels, const PolarityMap& pm,
                      const BranchWeights& w);

}  // namespace avf
