// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "avf/losses.hpp"

#include "avf/ops.hpp"

namespace avf {

std::string_view to_string(Polarity p) {
  switch (p) {
    case Polarity::positive: return "positive";
    case Polarity::neutral: return "neutral";
    case Polarity::negative: return "negative";
  }
  return "?";
}

PolarityMap PolarityMap::six_emotions(double gamma) {
  PolarityMap pm;
  pm.polarity = {Polarity::positive, Polarity::negative, Polarity::neutral,
                 Polarity::positive, Polarity::negative, Polarity::negative};
  pm.gamma = {gamma, gamma, gamma};
  return pm;
}

const std::array<std::string_view, 6>& PolarityMap::six_emotion_names() {
  static const std::array<std::string_view, 6> names = {"Excitation", "Fear", "Neutral", "Relaxation", "Sadness", "Tension"};
  return names;
}

void PolarityMap::validate(std::size_t k) const {
  if (polarity.size() != k) {
    throw ConfigError("polarity map covers " + std::to_string(polarity.size()) + " categories, model has " + std::to_string(k));
  }
  for (double g : gamma)
    if (!(g >= 0)) throw ConfigError("polarity penalty coefficients must be >= 0");
}

namespace {

template <typename T>
void check_labels(const Var<T>& logits, std::span<const std::size_t> labels, const char* who) {
  const Shape& s = logits.shape();
  if (s.size() != 2) throw ContractError(std::string(who) + ": logits must be [N x K], got " + shape_str(s));
  if (labels.size() != s[0]) {
    throw ContractError(std::string(who) + ": " + std::to_string(labels.size()) + " labels for " + std::to_string(s[0]) + " rows");
  }
  for (std::size_t y : labels)
    if (y >= s[1]) throw InputError(std::string(who) + ": label " + std::to_string(y) + " outside [0, " + std::to_string(s[1]) + ")");
}

}  // namespace

template <typename T>
Var<T> cross_entropy(Var<T> logits, std::span<const std::size_t> labels) {
  check_labels(logits, labels, "cross_entropy");
  const auto n = static_cast<T>(labels.size());
  return scale(sum(gather(log_softmax(logits), labels)), T(-1) / n);
}

std::vector<double> polarity_penalties(const Tensor<double>& logits, std::span<const std::size_t> labels, const PolarityMap& pm) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  pm.validate(k);
  std::vector<double> f(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t arg = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (logits[i * k + c] > logits[i * k + arg]) arg = c;
    const Polarity truth = pm.polarity[labels[i]];
    if (pm.polarity[arg] != truth) f[i] += pm.gamma_of(truth);
  }
  return f;
}

template <typename T>
Var<T> ep_ce_loss(Var<T> logits, std::span<const std::size_t> labels, const PolarityMap& pm) {
  check_labels(logits, labels, "ep_ce_loss");
  const std::vector<double> f = polarity_penalties(logits.value().template cast<double>(), labels, pm);
  Tensor<T> factors(Shape{labels.size()});
  for (std::size_t i = 0; i < f.size(); ++i) factors[i] = static_cast<T>(f[i]);
  Var<T> picked = gather(log_softmax(logits), labels);
  Var<T> weighted = mul(picked, logits.tape().constant(std::move(factors)));
  return scale(sum(weighted), T(-1) / static_cast<T>(labels.size()));
}

template <typename T>
Var<T> multitask_loss(Var<T> fused, Var<T> visual, Var<T> audio, std::span<const std::size_t> labels, const PolarityMap& pm,
                      const BranchWeights& w) {
  if (fused.shape() != visual.shape() || fused.shape() != audio.shape()) {
    throw ContractError("multitask loss: logit shapes " + shape_str(fused.shape()) + ", " + shape_str(visual.shape()) + ", " +
                        shape_str(audio.shape()) + " differ");
  }
  if (w.fused < 0 || w.visual < 0 || w.audio < 0) throw ConfigError("branch loss weights must be >= 0");
  Var<T> total = scale(ep_ce_loss(fused, labels, pm), static_cast<T>(w.fused));
  total = add(total, scale(ep_ce_loss(visual, labels, pm), static_cast<T>(w.visual)));
  return add(total, scale(ep_ce_loss(audio, labels, pm), static_cast<T>(w.audio)));
}

#define AVF_INSTANTIATE_LOSSES(T)                                                           \
  template Var<T> cross_entropy(Var<T>, std::span<const std::size_t>);                     \
  template Var<T> ep_ce_loss(Var<T>, std::span<const std::size_t>, const PolarityMap&);    \
  template Var<T> multitask_loss(Var<T>, Var<T>, Var<T>, std::span<const std::size_t>,     \
                                 const PolarityMap&, const BranchWeights&);

AVF_INSTANTIATE_LOSSES(float)
AVF_INSTANTIATE_LOSSES(double)

}  // namespace avf
