// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <cmath>
#include <cstdio>
#include <numbers>

#include "avf/attention.hpp"
#include "avf/mfcc.hpp"
#include "avf/ops.hpp"

namespace {

using namespace avf;

Tensor<float> filled(Shape shape, Rng& rng) {
  Tensor<float> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-1, 1));
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const auto a = filled({n, n}, rng), b = filled({n, n}, rng);
  for (auto _ : state) {
    Tape<float> tape;
    auto out = matmul(tape.constant(a), tape.constant(b));
    benchmark::DoNotOptimize(out.value().data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(128);

// Forward + backward of one windowed SA block, s snippets at C = 32.
void BM_SaBlock(benchmark::State& state) {
  const auto s = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  auto p = AttentionBlockParams<float>::init(32, 4, rng);
  const auto f = filled({s, 32}, rng);
  for (auto _ : state) {
    Tape<float> tape;
    auto out = sa_block(tape.constant(f), {1}, p);
    tape.backward(sum(out));
    benchmark::DoNotOptimize(p.attn.w_q.grad.data().data());
  }
}
BENCHMARK(BM_SaBlock)->Arg(4)->Arg(16)->Arg(64);

void BM_Mfcc(benchmark::State& state) {
  AudioTrack a;
  a.samples.resize(static_cast<std::size_t>(state.range(0) * a.sample_rate / 10));
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    a.samples[i] = static_cast<float>(0.5 * std::sin(2 * std::numbers::pi * 440.0 * static_cast<double>(i) / a.sample_rate));
  for (auto _ : state) {
    auto m = mfcc(a);
    benchmark::DoNotOptimize(m.data().data());
  }
  char label[32];
  std::snprintf(label, sizeof label, "%.1f s audio", static_cast<double>(state.range(0)) / 10.0);
  state.SetLabel(label);
}
BENCHMARK(BM_Mfcc)->Arg(15)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace
