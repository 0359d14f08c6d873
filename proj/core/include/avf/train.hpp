// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "avf/losses.hpp"
#include "avf/metrics.hpp"
#include "avf/model.hpp"
#include "avf/optim.hpp"

namespace avf {

struct TrainConfig {
  AdamWConfig optim;
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  std::size_t accumulation_steps = 4;  // batches per optimizer step
  std::uint64_t seed = 7;
  BranchWeights branch;
  PolarityMap polarity = PolarityMap::six_emotions();
  double stop_at_train_acc = 0.0;  // > 0: stop once the epoch's train ACC reaches it
  bool augment = true;             // random snippet runs, crops and flips

  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0;  // mean batch loss over the epoch
  double acc = 0, wa_f1 = 0, uar = 0;  // eval-mode pass over the training set
  std::size_t optimizer_steps = 0;
};

struct TrainResult {
  std::vector<EpochLog> history;
  double final_loss = 0;
  std::size_t optimizer_steps = 0;
};

/// Seeded permutation of 0..n-1 for one epoch.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

/// Seed of the augmentation draw for the sample at `position` of an epoch.
std::uint64_t augment_seed(std::uint64_t seed, std::size_t epoch, std::size_t position);

/// Forward + backward of one batch; gradients add into the parameters.
/// `positions` are the batch's positions within the epoch order (for the
/// augmentation seeds). Returns the batch loss.
template <typename T>
double accumulate_batch(AvCaNet<T>& model, const std::vector<PreparedSample>& data, std::span<const std::size_t> batch,
                        std::size_t epoch, std::size_t first_position, const TrainConfig& cfg);

/// Shuffled mini-batches; gradients of `accumulation_steps` consecutive
/// batches are averaged into one AdamW step (a partial group at the end of
/// an epoch is stepped with its own average). After every epoch the training
/// set is re-scored in eval mode and `on_epoch` is called.
template <typename T>
TrainResult train_loop(AvCaNet<T>& model, const std::vector<PreparedSample>& data, const TrainConfig& cfg,
                       const std::function<void(const EpochLog&)>& on_epoch = {});

struct Evaluation {
  MetricsReport metrics;
  std::vector<std::size_t> predictions;
  std::vector<std::vector<double>> embeddings;  // [E4_a | E4_v] per sample
  double loss = 0;                              // mean multitask loss
};

/// Eval mode: centre crops, centred snippet runs, no gradients kept.
template <typename T>
Evaluation evaluate(AvCaNet<T>& model, const std::vector<PreparedSample>& data, const PolarityMap& pm,
                    const BranchWeights& branch);

}  // namespace avf
