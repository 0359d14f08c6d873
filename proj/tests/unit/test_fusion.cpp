// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <numeric>

#include "avf/glcf.hpp"
#include "avf/lisf.hpp"
#include "helpers.hpp"

using namespace avf;
using avf::test::expect_pass;
using avf::test::random_tensor;

namespace {

PyramidStack<double> constant_stack(Tape<double>& tape, Modality m, std::size_t depth, Shape shape, Rng& rng) {
  PyramidStack<double> s{m, {}};
  for (std::size_t l = 0; l < depth; ++l) s.layers.push_back(tape.constant(random_tensor(shape, rng)));
  return s;
}

}  // namespace

TEST_CASE("pyramid dilation schedule") {
  CHECK(pyramid_dilation(0) == 1);
  CHECK(pyramid_dilation(1) == 2);
  CHECK(pyramid_dilation(3) == 8);
}

TEST_CASE("pyramid forward") {
  Rng rng(1);
  SUBCASE("depth one holds a single layer") {
    auto p = LisfParams<double>::init(8, 2, 1, {1}, false, rng);
    Tape<double> tape;
    auto [a, v] = pyramid_forward(tape.constant(random_tensor({4, 8}, rng)), tape.constant(random_tensor({4, 8}, rng)),
                                  p.window, std::span(p.layers));
    CHECK(a.depth() == 1);
    CHECK(v.depth() == 1);
    CHECK(a.modality == Modality::audio);
  }
  SUBCASE("zero projections collapse to the residual path") {
    auto p = LisfParams<double>::init(8, 2, 2, {1}, false, rng);
    for (auto& layer : p.layers) {
      for (auto* b : {&layer.sa_audio, &layer.sa_visual, &layer.cma}) {
        b->attn.w_o.value.fill(0);
        for (auto* q : {&b->ffn.w1, &b->ffn.b1, &b->ffn.w2, &b->ffn.b2}) q->value.fill(0);
      }
      for (auto* g : {&layer.gate_audio, &layer.gate_visual})
        for (auto* q : {&g->w_s, &g->b_s, &g->w_c, &g->b_c}) q->value.fill(0);
      for (auto* t : {&layer.temporal_audio, &layer.temporal_visual}) {
        t->kernel.value.fill(0);
        t->bias.value.fill(0);
      }
    }
    Tape<double> tape;
    auto a0 = tape.constant(random_tensor({4, 8}, rng));
    auto v0 = tape.constant(random_tensor({4, 8}, rng));
    auto [a, v] = pyramid_forward(a0, v0, p.window, std::span(p.layers));
    // Each layer reduces to x -> (LN(x) + LN(x)) / 2 = LN(x) with unit gain.
    auto expect = layer_norm(a0, tape.param(p.layers[0].sa_audio.ln_gain), tape.param(p.layers[0].sa_audio.ln_bias));
    CHECK(max_abs_diff(a.layers[0].value(), expect.value()) < 1e-12);
    auto expect2 = layer_norm(expect, tape.param(p.layers[1].sa_audio.ln_gain), tape.param(p.layers[1].sa_audio.ln_bias));
    CHECK(max_abs_diff(a.layers[1].value(), expect2.value()) < 1e-12);
  }
  SUBCASE("depth mismatch") {
    auto p = LisfParams<double>::init(8, 2, 1, {1}, false, rng);
    Tape<double> tape;
    CHECK_THROWS_AS(pyramid_forward(tape.constant(random_tensor({4, 8}, rng)), tape.constant(random_tensor({3, 8}, rng)),
                                    p.window, std::span(p.layers)),
                    DimensionError);
  }
}

TEST_CASE("selective integration") {
  Rng rng(2);
  SUBCASE("hand-set weights") {
    Tape<double> tape;
    auto st = constant_stack(tape, Modality::audio, 2, {3, 4}, rng);
    auto w = tape.constant(Tensor<double>(Shape{3, 2}, std::vector<double>{0.25, 0.75, 0.25, 0.75, 0.25, 0.75}));
    auto out = weighted_layer_sum(st, w).value();
    for (std::size_t i = 0; i < out.size(); ++i)
      CHECK(out[i] == doctest::Approx(0.25 * st.layers[0].value()[i] + 0.75 * st.layers[1].value()[i]).epsilon(1e-15));
  }
  SUBCASE("one-hot weights reproduce the layer") {
    Tape<double> tape;
    auto st = constant_stack(tape, Modality::audio, 3, {4, 5}, rng);
    for (std::size_t l = 0; l < 3; ++l) {
      Tensor<double> w(Shape{4, 3});
      for (std::size_t r = 0; r < 4; ++r) w[r * 3 + l] = 1;
      CHECK(weighted_layer_sum(st, tape.constant(w)).value() == st.layers[l].value());
    }
  }
  SUBCASE("single layer gets weight one") {
    auto p = SelectiveIntegrationParams<double>::init(4, 1, false, rng);
    Tape<double> tape;
    auto a = constant_stack(tape, Modality::audio, 1, {3, 4}, rng);
    auto v = constant_stack(tape, Modality::visual, 1, {3, 4}, rng);
    auto e1a = layer_weights(a, p);
    auto e1v = layer_weights(v, p);
    auto mod = modulate_layer_weights(e1a, e1v, p).value();
    auto out = selective_integration(a, v, p).value();
    for (std::size_t r = 0; r < 3; ++r) {
      // softmax over a single key is 1, so the modulated weight is w_v * E1_v
      CHECK(mod[r] == doctest::Approx(p.w_v.value[0] * e1v.value()[r]).epsilon(1e-15));
      for (std::size_t c = 0; c < 4; ++c) CHECK(out.at(r, c) == doctest::Approx(mod[r] * a.layers[0].value().at(r, c)).epsilon(1e-14));
    }
    p.w_v.value[0] = 1;
    p.w_a[0].value.fill(0);
    p.b_a[0].value.fill(1e3);  // sigmoid saturates to exactly 1
    Tape<double> fresh;  // a tape snapshots parameters at first use
    PyramidStack<double> a2{Modality::audio, {fresh.constant(a.layers[0].value())}};
    PyramidStack<double> v2{Modality::visual, {fresh.constant(v.layers[0].value())}};
    CHECK(selective_integration(a2, v2, p).value() == a.layers[0].value());
  }
  SUBCASE("identical stacks give identical outputs") {
    auto p = SelectiveIntegrationParams<double>::init(4, 2, false, rng);
    Tape<double> tape;
    auto st = constant_stack(tape, Modality::audio, 2, {3, 4}, rng);
    CHECK(max_abs_diff(selective_integration(st, st, p).value(), selective_integration(st, st, p).value()) <= 1e-12);
  }
  SUBCASE("weights bounded, shape fixed for every depth") {
    for (std::size_t depth = 1; depth <= 4; ++depth) {
      auto p = SelectiveIntegrationParams<double>::init(4, depth, depth % 2 == 0, rng);
      Tape<double> tape;
      auto a = constant_stack(tape, Modality::audio, depth, {3, 4}, rng);
      auto v = constant_stack(tape, Modality::visual, depth, {3, 4}, rng);
      auto e1 = layer_weights(a, p).value();
      CHECK(e1.shape() == Shape{3, depth});
      for (double x : e1.data()) CHECK((x > 0 && x < 1));
      CHECK(selective_integration(a, v, p).shape() == Shape{3, 4});
    }
  }
  SUBCASE("depth mismatch") {
    auto p = SelectiveIntegrationParams<double>::init(4, 2, false, rng);
    Tape<double> tape;
    auto a = constant_stack(tape, Modality::audio, 2, {3, 4}, rng);
    auto v = constant_stack(tape, Modality::visual, 1, {3, 4}, rng);
    CHECK_THROWS_AS(selective_integration(a, v, p), ContractError);
  }
}

TEST_CASE("lisf passes finite-difference checks") {
  Rng rng(3);
  auto p = LisfParams<double>::init(8, 2, 2, {1}, false, rng);
  ParameterRegistry<double> reg;
  p.collect("lisf", reg);
  auto ps = test::param_ptrs(reg);
  expect_pass(grad_check("lisf", {random_tensor({4, 8}, rng), random_tensor({4, 8}, rng)}, ps, [&](Tape<double>&, auto in) {
    auto out = lisf_forward(in[0], in[1], p);
    return add(random_projection(out.audio, 5), random_projection(out.visual, 6));
  }));
}

TEST_CASE("global complementary fusion") {
  Rng rng(4);
  auto g = GlobalFusionParams<double>::init(8, 2, rng);
  SUBCASE("single snippet") {
    Tape<double> tape;
    auto a = tape.constant(random_tensor({1, 8}, rng));
    auto v = tape.constant(random_tensor({1, 8}, rng));
    auto [ea, ev] = global_complementary_fusion(a, v, g);
    CHECK(ea.shape() == Shape{8});
    auto e3 = multi_head_attention(a, v, g.cma, nullptr);
    auto row = relu(add(linear(e3, tape.param(g.w_g), tape.param(g.b_g)), a)).value();
    CHECK(max_abs_diff(ea.value(), row.reshaped({8})) == 0);
  }
  SUBCASE("zero projections") {
    g.cma.w_o.value.fill(0);
    g.w_g.value.fill(0);
    g.b_g.value.fill(0);
    Tape<double> tape;
    auto a = tape.constant(random_tensor({4, 8}, rng));
    auto v = tape.constant(random_tensor({4, 8}, rng));
    auto [ea, ev] = global_complementary_fusion(a, v, g);
    auto expect = mean_pool(relu(a), 0).value();
    CHECK(max_abs_diff(ea.value(), expect) < 1e-15);
  }
  SUBCASE("pooling commutes with permutation") {
    Tape<double> tape;
    Tensor<double> x = random_tensor({5, 3}, rng);
    Tensor<double> y(Shape{5, 3});
    const std::size_t perm[] = {3, 0, 4, 1, 2};
    for (std::size_t r = 0; r < 5; ++r)
      for (std::size_t c = 0; c < 3; ++c) y[r * 3 + c] = x[perm[r] * 3 + c];
    CHECK(max_abs_diff(mean_pool(tape.constant(x), 0).value(), mean_pool(tape.constant(y), 0).value()) < 1e-12);
  }
  SUBCASE("gradient check") {
    ParameterRegistry<double> reg;
    g.collect("glcf", reg);
    auto head = FusionHeadParams<double>::init(FusionStrategy::mid_concat, 8, 6, rng);
    head.collect("head", reg);
    auto ps = test::param_ptrs(reg);
    expect_pass(grad_check("glcf", {random_tensor({4, 8}, rng), random_tensor({4, 8}, rng)}, ps, [&](Tape<double>&, auto in) {
      auto [ea, ev] = global_complementary_fusion(in[0], in[1], g);
      return random_projection(fuse_head(ea, ev, head), 7);
    }));
  }
}

TEST_CASE("fusion strategies") {
  Rng rng(5);
  CHECK(parse_fusion_strategy("MidConcat") == FusionStrategy::mid_concat);
  CHECK(parse_fusion_strategy("ew-multiply") == FusionStrategy::ew_multiply);
  CHECK(parse_fusion_strategy("GATED") == FusionStrategy::gated);
  CHECK_FALSE(parse_fusion_strategy("late").has_value());
  for (FusionStrategy s : kAllFusionStrategies) {
    CHECK(parse_fusion_strategy(to_string(s)) == s);
    auto head = FusionHeadParams<double>::init(s, 8, 6, rng);
    ParameterRegistry<double> reg;
    head.collect("head", reg);
    CHECK(reg.total_size() == fusion_head_size(s, 8, 6));
    Tape<double> tape;
    auto logits = fuse_head(tape.constant(random_tensor({8}, rng)), tape.constant(random_tensor({8}, rng)), head);
    CHECK(logits.shape() == Shape{1, 6});
    ParameterRegistry<double> r2;
    head.collect("h", r2);
    auto ps = test::param_ptrs(r2);
    expect_pass(grad_check(std::string("head_") + std::string(to_string(s)), {random_tensor({8}, rng), random_tensor({8}, rng)},
                           ps, [&](Tape<double>&, auto in) { return random_projection(fuse_head(in[0], in[1], head), 8); }));
  }
  CHECK(fusion_head_size(FusionStrategy::mid_concat, 8, 6) == 102);
  CHECK(fusion_head_size(FusionStrategy::sum, 8, 6) == 54);
  CHECK(fusion_head_size(FusionStrategy::gated, 8, 6) == 71);
  CHECK(fusion_head_size(FusionStrategy::neural, 8, 6) == 190);
  CHECK_THROWS_AS(FusionHeadParams<double>::init(FusionStrategy::sum, 8, 0, rng), ConfigError);
}

TEST_CASE("mid-concat head fixtures") {
  Rng rng(6);
  auto head = FusionHeadParams<double>::init(FusionStrategy::mid_concat, 2, 2, rng);
  Tape<double> tape;
  auto a = tape.constant(Tensor<double>::vector({1.5, -2}));
  auto v = tape.constant(Tensor<double>::vector({0.5, 3}));
  SUBCASE("selector picks the audio half") {
    head.w_f.value = Tensor<double>::matrix({{1, 0}, {0, 1}, {0, 0}, {0, 0}});
    head.b_f.value.fill(0);
    CHECK(fuse_head(a, v, head).value().reshaped({2}) == a.value());
  }
  SUBCASE("hand arithmetic, 2x4 weight (as [4 x 2] here)") {
    head.w_f.value = Tensor<double>::matrix({{1, 2}, {0, -1}, {3, 0}, {1, 1}});
    head.b_f.value = Tensor<double>::vector({0.5, -0.5});
    // [1.5,-2,0.5,3] . cols: 1.5+0+1.5+3+0.5 = 6.5 ; 3+2+0+3-0.5 = 7.5
    CHECK(fuse_head(a, v, head).value() == Tensor<double>::matrix({{6.5, 7.5}}));
  }
  SUBCASE("linear in the pooled vectors") {
    head.b_f.value.fill(0);
    auto base = fuse_head(a, v, head).value();
    auto scaled = fuse_head(scale(a, 2.5), scale(v, 2.5), head).value();
    for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(scaled[i] - 2.5 * base[i]) < 1e-6);
  }
  SUBCASE("sum with a zero visual vector") {
    auto sum_head = FusionHeadParams<double>::init(FusionStrategy::sum, 2, 2, rng);
    auto zero = tape.constant(Tensor<double>::vector({0, 0}));
    auto expect = linear(reshape(a, Shape{1, 2}), tape.param(sum_head.w_f), tape.param(sum_head.b_f)).value();
    CHECK(fuse_head(a, zero, sum_head).value() == expect);
  }
}
