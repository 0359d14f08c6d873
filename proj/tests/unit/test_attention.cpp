// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "avf/attention.hpp"
#include "helpers.hpp"

using namespace avf;
using avf::test::expect_pass;
using avf::test::random_tensor;

namespace {

template <typename T>
AttentionBlockParams<T> block(std::size_t c, std::size_t heads, std::uint64_t seed) {
  Rng rng(seed);
  return AttentionBlockParams<T>::init(c, heads, rng);
}

template <typename T>
void set_identity(Parameter<T>& p) {
  const std::size_t n = p.value.shape()[0];
  p.value.fill(T(0));
  for (std::size_t i = 0; i < n; ++i) p.value[i * n + i] = T(1);
}

}  // namespace

TEST_CASE("window mask band") {
  const Mask m = window_mask(6, 6, {2});
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) CHECK(m(i, j) == ((i > j ? i - j : j - i) <= 2));
}

TEST_CASE("att fixtures") {
  Rng rng(1);
  SUBCASE("d = 0 returns v") {
    Tape<double> tape;
    auto q = tape.constant(random_tensor({5, 3}, rng));
    auto v = tape.constant(random_tensor({5, 3}, rng));
    const Mask m = window_mask(5, 5, {0});
    auto out = att(q, q, v, &m).value();
    CHECK(out == v.value());
  }
  SUBCASE("full window equals unmasked") {
    Tape<float> tape;
    auto q = tape.constant(random_tensor<float>({5, 4}, rng));
    auto k = tape.constant(random_tensor<float>({5, 4}, rng));
    auto v = tape.constant(random_tensor<float>({5, 4}, rng));
    const Mask m = window_mask(5, 5, {4});
    CHECK(max_abs_diff(att(q, k, v, &m).value(), att(q, k, v, nullptr).value()) < 1e-6);
  }
  SUBCASE("s = 2 hand computation") {
    // q = [[1,0],[0,1]], k = [[1,0],[0,2]], v = [[1,2],[3,4]], dk = 2.
    Tape<double> tape;
    auto q = tape.constant(Tensor<double>::matrix({{1, 0}, {0, 1}}));
    auto k = tape.constant(Tensor<double>::matrix({{1, 0}, {0, 2}}));
    auto v = tape.constant(Tensor<double>::matrix({{1, 2}, {3, 4}}));
    Tensor<double> w;
    auto out = att(q, k, v, nullptr, &w).value();
    // row 0 scores [1/sqrt2, 0]; row 1 scores [0, 2/sqrt2]
    const double a0 = 1.0 / (1.0 + std::exp(-1.0 / std::sqrt(2.0)));
    const double a1 = 1.0 / (1.0 + std::exp(2.0 / std::sqrt(2.0)));
    CHECK(w.at(0, 0) == doctest::Approx(a0).epsilon(1e-14));
    CHECK(w.at(1, 0) == doctest::Approx(a1).epsilon(1e-14));
    CHECK(out.at(0, 0) == doctest::Approx(a0 * 1 + (1 - a0) * 3).epsilon(1e-14));
    CHECK(out.at(1, 1) == doctest::Approx(a1 * 2 + (1 - a1) * 4).epsilon(1e-14));
  }
}

TEST_CASE("sa block band structure and shape") {
  Rng rng(2);
  for (std::size_t d : {0u, 1u, 2u}) {
    auto p = block<double>(8, 2, 10 + d);
    Tape<double> tape;
    auto f = tape.constant(random_tensor({6, 8}, rng));
    AttentionTrace<double> trace;
    auto out = sa_block(f, {d}, p, &trace);
    CHECK(out.shape() == Shape{6, 8});
    REQUIRE(trace.head_weights.size() == 2);
    for (const auto& w : trace.head_weights)
      for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j)
          if ((i > j ? i - j : j - i) > d) CHECK(w.at(i, j) == 0.0);
  }
  // Window wider than the sequence is clipped, not an error.
  auto p = block<double>(8, 2, 3);
  Tape<double> tape;
  CHECK(sa_block(tape.constant(random_tensor({3, 8}, rng)), {10}, p).shape() == Shape{3, 8});
}

TEST_CASE("sa block with zero output projection and feed-forward is layer norm of the input") {
  Rng rng(3);
  auto p = block<double>(8, 4, 4);
  p.attn.w_o.value.fill(0);
  for (auto* q : {&p.ffn.w1, &p.ffn.b1, &p.ffn.w2, &p.ffn.b2}) q->value.fill(0);
  Tape<double> tape;
  auto f = tape.constant(random_tensor({4, 8}, rng));
  auto out = sa_block(f, {1}, p).value();
  auto ln = layer_norm(f, tape.param(p.ln_gain), tape.param(p.ln_bias)).value();
  CHECK(max_abs_diff(out, ln) < 1e-15);
}

TEST_CASE("cma block") {
  Rng rng(4);
  auto p = block<double>(8, 2, 5);
  Tape<double> tape;
  auto a = tape.constant(random_tensor({5, 8}, rng));
  auto v = tape.constant(random_tensor({5, 8}, rng));
  CHECK(cma_block(a, a, {1}, p).value() == sa_block(a, {1}, p).value());
  CHECK(max_abs_diff(cma_block(a, v, {1}, p).value(), cma_block(v, a, {1}, p).value()) > 1e-3);
  AttentionTrace<double> trace;
  cma_block(a, v, {1}, p, &trace);
  for (const auto& w : trace.head_weights)
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j)
        if ((i > j ? i - j : j - i) > 1) CHECK(w.at(i, j) == 0.0);
}

TEST_CASE("gated parallel fusion fixtures") {
  Rng rng(6);
  auto g = GateParams<double>::init(4, rng);
  Tape<double> tape;
  auto fs = tape.constant(random_tensor({3, 4}, rng));
  auto fc = tape.constant(random_tensor({3, 4}, rng));
  SUBCASE("identical inputs") {
    auto out = gated_parallel_fusion(fs, fs, g).value();
    auto joined = concat({fs, fs}, 1);
    auto gs = sigmoid(linear(joined, tape.param(g.w_s), tape.param(g.b_s))).value();
    auto gc = sigmoid(linear(joined, tape.param(g.w_c), tape.param(g.b_c))).value();
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx((gs[i] + gc[i]) * fs.value()[i]));
  }
  SUBCASE("zero weights give the average") {
    for (auto* q : {&g.w_s, &g.b_s, &g.w_c, &g.b_c}) q->value.fill(0);
    auto out = gated_parallel_fusion(fs, fc, g).value();
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx((fs.value()[i] + fc.value()[i]) / 2));
  }
}

TEST_CASE("dilated residual block") {
  Rng rng(7);
  auto p = DilatedResidualParams<double>::init(4, rng);
  for (std::size_t s : {1u, 4u, 16u}) {
    Tape<double> tape;
    CHECK(dilated_residual_block(tape.constant(random_tensor({s, 4}, rng)), p, 2).shape() == Shape{s, 4});
  }
  SUBCASE("zero kernel is identity") {
    p.kernel.value.fill(0);
    p.bias.value.fill(0);
    Tape<double> tape;
    auto f = tape.constant(random_tensor({5, 4}, rng));
    CHECK(dilated_residual_block(f, p, 1).value() == f.value());
  }
  SUBCASE("dilation-2 receptive field") {
    p.bias.value.fill(5);  // keep every ReLU active so the probe sees every dependency
    Tensor<double> x = random_tensor({9, 4}, rng);
    Tape<double> tape;
    auto base = dilated_residual_block(tape.constant(x), p, 2).value();
    const std::size_t t = 4;
    x[t * 4 + 1] += 0.5;
    auto moved = dilated_residual_block(tape.constant(x), p, 2).value();
    for (std::size_t r = 0; r < 9; ++r) {
      double diff = 0;
      for (std::size_t c = 0; c < 4; ++c) diff = std::max(diff, std::abs(moved.at(r, c) - base.at(r, c)));
      const bool expected = r == t || r == t - 2 || r == t + 2;
      CHECK((diff > 0) == expected);
    }
  }
  SUBCASE("dilation beyond length is pointwise") {
    Tensor<double> x = random_tensor({3, 4}, rng);
    Tape<double> tape;
    auto base = dilated_residual_block(tape.constant(x), p, 3).value();
    x[0] += 0.5;
    auto moved = dilated_residual_block(tape.constant(x), p, 3).value();
    for (std::size_t i = 4; i < 12; ++i) CHECK(moved[i] == base[i]);
  }
}

TEST_CASE("cma parameters are shared storage") {
  Rng rng(8);
  auto p = block<double>(8, 2, 9);
  Tape<double> t1;
  auto a = t1.constant(random_tensor({4, 8}, rng));
  auto v = t1.constant(random_tensor({4, 8}, rng));
  auto before = cma_block(v, a, {1}, p).value();
  p.attn.w_v.value[0] += 0.25;  // mutate through the audio-direction handle
  Tape<double> t2;
  auto after = cma_block(t2.constant(v.value()), t2.constant(a.value()), {1}, p).value();
  CHECK(max_abs_diff(before, after) > 0);
}

TEST_CASE("attention blocks pass finite-difference checks") {
  Rng rng(11);
  SUBCASE("sa") {
    auto p = block<double>(8, 2, 12);
    ParameterRegistry<double> reg;
    p.collect("sa", reg);
    auto ps = test::param_ptrs(reg);
    expect_pass(grad_check("sa_block", {random_tensor({4, 8}, rng)}, ps, [&](Tape<double>&, auto in) {
      return random_projection(sa_block(in[0], {1}, p), 1);
    }));
  }
  SUBCASE("cma") {
    auto p = block<double>(8, 2, 13);
    ParameterRegistry<double> reg;
    p.collect("cma", reg);
    auto ps = test::param_ptrs(reg);
    expect_pass(grad_check("cma_block", {random_tensor({4, 8}, rng), random_tensor({4, 8}, rng)}, ps,
                           [&](Tape<double>&, auto in) {
                             return random_projection(add(cma_block(in[0], in[1], {1}, p), cma_block(in[1], in[0], {1}, p)), 2);
                           }));
  }
  SUBCASE("gate") {
    auto g = GateParams<double>::init(8, rng);
    ParameterRegistry<double> reg;
    g.collect("g", reg);
    auto ps = test::param_ptrs(reg);
    expect_pass(grad_check("gated_parallel_fusion", {random_tensor({4, 8}, rng), random_tensor({4, 8}, rng)}, ps,
                           [&](Tape<double>&, auto in) { return random_projection(gated_parallel_fusion(in[0], in[1], g), 3); }));
  }
  SUBCASE("dilated residual") {
    auto p = DilatedResidualParams<double>::init(8, rng);
    ParameterRegistry<double> reg;
    p.collect("t", reg);
    auto ps = test::param_ptrs(reg);
    expect_pass(grad_check("dilated_residual_block", {random_tensor({4, 8}, rng)}, ps,
                           [&](Tape<double>&, auto in) { return random_projection(dilated_residual_block(in[0], p, 2), 4); }));
  }
}

TEST_CASE("heads must divide channels") {
  Rng rng(1);
  CHECK_THROWS_AS(AttentionParams<double>::init(10, 4, rng), ConfigError);
}
