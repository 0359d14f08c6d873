// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace avf {

struct MetricsReport {
  double acc = 0, wa_f1 = 0, uar = 0;
  std::vector<std::size_t> support;          // per true class
  std::vector<double> per_class_accuracy;    // recall; 0 for classes without support
  std::vector<double> per_class_f1;          // 0 when precision + recall == 0
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

/// ACC = correct / N. UAR averages recall over classes that occur in
/// `labels`. WA-F1 weights each class's F1 by its support, so classes
/// without support contribute nothing.
MetricsReport compute_metrics(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                              std::size_t num_classes);

}  // namespace avf
