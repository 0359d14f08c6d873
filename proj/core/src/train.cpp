// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "avf/train.hpp"

#include <numeric>
#include <string>

#include "avf/ops.hpp"

namespace avf {

void TrainConfig::validate() const {
  optim.validate();
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (accumulation_steps == 0) throw ConfigError("accumulation_steps must be >= 1");
  if (branch.fused < 0 || branch.visual < 0 || branch.audio < 0) throw ConfigError("branch loss weights must be >= 0");
  if (stop_at_train_acc < 0 || stop_at_train_acc > 1) throw ConfigError("stop_at_train_acc must lie in [0, 1]");
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0xE90C, epoch));
  rng.shuffle(order);
  return order;
}

std::uint64_t augment_seed(std::uint64_t seed, std::size_t epoch, std::size_t position) {
  return derive_seed(derive_seed(seed, 0xA06), epoch, position);
}

namespace {

template <typename T>
ModelOutput<T> run_batch(AvCaNet<T>& model, Tape<T>& tape, const std::vector<PreparedSample>& data,
                         std::span<const std::size_t> batch, bool train, std::size_t epoch, std::size_t first_position,
                         std::uint64_t seed) {
  std::vector<Var<T>> fused, visual, audio, emb;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const PreparedSample& s = data.at(batch[j]);
    Rng rng(augment_seed(seed, epoch, first_position + j));
    const Tensor<float> frames = video_input(s, model.config(), train, rng);
    ModelOutput<T> out = model.forward(tape, frames.template cast<T>(), s.audio_chunks.template cast<T>());
    fused.push_back(out.fused);
    visual.push_back(out.visual);
    audio.push_back(out.audio);
    emb.push_back(out.embedding);
  }
  auto rows = [](const std::vector<Var<T>>& v) { return v.size() == 1 ? v.front() : concat(std::span<const Var<T>>(v), 0); };
  return {rows(fused), rows(visual), rows(audio), rows(emb)};
}

std::vector<std::size_t> labels_of(const std::vector<PreparedSample>& data, std::span<const std::size_t> idx) {
  std::vector<std::size_t> y;
  for (std::size_t i : idx) y.push_back(data.at(i).label);
  return y;
}

}  // namespace

template <typename T>
double accumulate_batch(AvCaNet<T>& model, const std::vector<PreparedSample>& data, std::span<const std::size_t> batch,
                        std::size_t epoch, std::size_t first_position, const TrainConfig& cfg) {
  Tape<T> tape;
  ModelOutput<T> out = run_batch(model, tape, data, batch, cfg.augment, epoch, first_position, cfg.seed);
  const auto y = labels_of(data, batch);
  Var<T> loss = multitask_loss(out.fused, out.visual, out.audio, std::span<const std::size_t>(y), cfg.polarity, cfg.branch);
  tape.backward(loss);
  return static_cast<double>(loss.value()[0]);
}

template <typename T>
TrainResult train_loop(AvCaNet<T>& model, const std::vector<PreparedSample>& data, const TrainConfig& cfg,
                       const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  cfg.polarity.validate(model.config().num_classes);
  if (data.empty()) throw InputError("training set is empty");
  const ParameterRegistry<T>& params = model.parameters();
  AdamW<T> opt(params, cfg.optim);
  params.zero_grad();
  TrainResult result;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(data.size(), cfg.seed, epoch);
    double loss_sum = 0;
    std::size_t batches = 0, pending = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, len);
      try {
        loss_sum += accumulate_batch(model, data, batch, epoch, start, cfg);
      } catch (const NumericalError& e) {
        throw NumericalError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches) + ": " + e.what());
      }
      ++batches;
      if (++pending == cfg.accumulation_steps) {
        opt.step(1.0 / static_cast<double>(pending));
        params.zero_grad();
        pending = 0;
      }
    }
    if (pending > 0) {
      opt.step(1.0 / static_cast<double>(pending));
      params.zero_grad();
    }
    const Evaluation ev = evaluate(model, data, cfg.polarity, cfg.branch);
    EpochLog log{epoch, loss_sum / static_cast<double>(batches), ev.metrics.acc, ev.metrics.wa_f1, ev.metrics.uar, opt.steps()};
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);
    if (cfg.stop_at_train_acc > 0 && log.acc >= cfg.stop_at_train_acc) break;
  }
  result.final_loss = result.history.back().loss;
  result.optimizer_steps = opt.steps();
  return result;
}

template <typename T>
Evaluation evaluate(AvCaNet<T>& model, const std::vector<PreparedSample>& data, const PolarityMap& pm,
                    const BranchWeights& branch) {
  if (data.empty()) throw InputError("evaluation set is empty");
  constexpr std::size_t kChunk = 16;
  Evaluation ev;
  std::vector<std::size_t> labels;
  double loss_sum = 0;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    std::vector<std::size_t> idx(std::min(kChunk, data.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    Tape<T> tape;
    ModelOutput<T> out = run_batch(model, tape, data, idx, false, 0, 0, 0);
    const auto y = labels_of(data, idx);
    loss_sum += static_cast<double>(
                    multitask_loss(out.fused, out.visual, out.audio, std::span<const std::size_t>(y), pm, branch).value()[0]) *
                static_cast<double>(idx.size());
    const Tensor<T>& logits = out.fused.value();
    const Tensor<T>& emb = out.embedding.value();
    const std::size_t k = logits.dim(1), e = emb.dim(1);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      std::size_t arg = 0;
      for (std::size_t c = 1; c < k; ++c)
        if (logits[r * k + c] > logits[r * k + arg]) arg = c;
      ev.predictions.push_back(arg);
      ev.embeddings.emplace_back(emb.data().begin() + static_cast<std::ptrdiff_t>(r * e),
                                 emb.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * e));
    }
    labels.insert(labels.end(), y.begin(), y.end());
  }
  ev.metrics = compute_metrics(ev.predictions, labels, model.config().num_classes);
  ev.loss = loss_sum / static_cast<double>(data.size());
  return ev;
}

#define AVF_INSTANTIATE_TRAIN(T)                                                                                  \
  template double accumulate_batch(AvCaNet<T>&, const std::vector<PreparedSample>&, std::span<const std::size_t>, \
                                   std::size_t, std::size_t, const TrainConfig&);                                 \
  template TrainResult train_loop(AvCaNet<T>&, const std::vector<PreparedSample>&, const TrainConfig&,            \
                                  const std::function<void(const EpochLog&)>&);                                  \
  template Evaluation evaluate(AvCaNet<T>&, const std::vector<PreparedSample>&, const PolarityMap&, const BranchWeights&);

AVF_INSTANTIATE_TRAIN(float)
AVF_INSTANTIATE_TRAIN(double)

}  // namespace avf
