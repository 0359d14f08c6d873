// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "avf/losses.hpp"
#include "avf/model.hpp"
#include "avf/synth.hpp"

namespace {

using namespace avf;

// One training sample through the desk-config model: forward only, and
// forward + multitask loss + backward.
struct DeskSample {
  ModelConfig mc;
  std::vector<PreparedSample> data;
  Tensor<float> frames;

  DeskSample() {
    SynthConfig sc;
    sc.n_per_class = 1;
    data = prepare_samples(synth_dataset(sc), mc);
    Rng rng(3);
    frames = video_input(data[0], mc, false, rng);
  }
};

const DeskSample& desk() {
  static const DeskSample d;
  return d;
}

void BM_ModelForward(benchmark::State& state) {
  const DeskSample& d = desk();
  AvCaNet<float> model(d.mc, 1);
  for (auto _ : state) {
    Tape<float> tape;
    auto out = model.forward(tape, d.frames, d.data[0].audio_chunks);
    benchmark::DoNotOptimize(out.fused.value().data().data());
  }
}
BENCHMARK(BM_ModelForward)->Unit(benchmark::kMillisecond);

void BM_ModelTrainStep(benchmark::State& state) {
  const DeskSample& d = desk();
  AvCaNet<float> model(d.mc, 1);
  const std::vector<std::size_t> y{d.data[0].label};
  for (auto _ : state) {
    Tape<float> tape;
    auto out = model.forward(tape, d.frames, d.data[0].audio_chunks);
    tape.backward(multitask_loss(out.fused, out.visual, out.audio, std::span<const std::size_t>(y),
                                 PolarityMap::six_emotions(), {}));
    model.parameters().zero_grad();
  }
}
BENCHMARK(BM_ModelTrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
