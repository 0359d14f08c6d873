// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "avf/metrics.hpp"

#include <string>

#include "avf/errors.hpp"

namespace avf {

MetricsReport compute_metrics(std::span<const std::size_t> preds, std::span<const std::size_t> labels, std::size_t k) {
  if (preds.size() != labels.size()) throw ContractError("metrics: prediction and label counts differ");
  if (preds.empty()) throw InputError("metrics: no samples");
  if (k == 0) throw ConfigError("metrics: num_classes must be positive");
  MetricsReport r;
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] >= k || labels[i] >= k) throw InputError("metrics: class id outside [0, " + std::to_string(k) + ")");
    ++r.confusion[labels[i]][preds[i]];
  }
  const auto n = static_cast<double>(preds.size());
  r.support.assign(k, 0);
  r.per_class_accuracy.assign(k, 0.0);
  r.per_class_f1.assign(k, 0.0);
  std::size_t correct = 0, present = 0;
  double recall_sum = 0, weighted_f1 = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t predicted = 0;
    for (std::size_t t = 0; t < k; ++t) {
      r.support[c] += r.confusion[c][t];
      predicted += r.confusion[t][c];
    }
    const std::size_t tp = r.confusion[c][c];
    correct += tp;
    const double recall = r.support[c] ? static_cast<double>(tp) / static_cast<double>(r.support[c]) : 0.0;
    const double precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    r.per_class_accuracy[c] = recall;
    r.per_class_f1[c] = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    if (r.support[c]) {
      ++present;
      recall_sum += recall;
      weighted_f1 += static_cast<double>(r.support[c]) * r.per_class_f1[c];
    }
  }
  r.acc = static_cast<double>(correct) / n;
  r.uar = recall_sum / static_cast<double>(present);
  r.wa_f1 = weighted_f1 / n;
  return r;
}

}  // namespace avf
