// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "avf/gradient_suite.hpp"

#include <functional>
#include <string>

#include "avf/encoders.hpp"
#include "avf/glcf.hpp"
#include "avf/lisf.hpp"
#include "avf/losses.hpp"
#include "avf/ops.hpp"

namespace avf {

namespace {

using Inputs = std::span<const Var<double>>;

class Suite {
 public:
  explicit Suite(const GradientSuiteConfig& cfg) : cfg_(cfg) {}

  Rng next_rng() { return Rng(derive_seed(cfg_.seed, 0x6C, counter_++)); }
  std::uint64_t proj_seed() const { return derive_seed(cfg_.seed, 0x9F, counter_); }

  Tensor<double> random(Shape shape, Rng& rng, double lo = -1, double hi = 1) {
    Tensor<double> t(std::move(shape));
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
  }

  // Keeps ReLU inputs away from the kink.
  Tensor<double> off_zero(Shape shape, Rng& rng) {
    Tensor<double> t(std::move(shape));
    for (auto& v : t.data()) v = (rng.coin() ? 1.0 : -1.0) * rng.uniform(0.1, 1.0);
    return t;
  }

  void check(std::string unit, std::vector<Tensor<double>> inputs, std::vector<Parameter<double>*> params,
             const std::function<Var<double>(Inputs)>& f) {
    const std::uint64_t seed = proj_seed();
    reports_.push_back(grad_check(
        std::move(unit), std::move(inputs), params,
        [&](Tape<double>&, Inputs in) { return random_projection(f(in), seed); }, cfg_.options));
  }

  void unary(std::string unit, Shape shape, const std::function<Var<double>(Var<double>)>& f, bool kink = false) {
    Rng rng = next_rng();
    Tensor<double> x = kink ? off_zero(shape, rng) : random(shape, rng);
    check(std::move(unit), {x}, {}, [&](Inputs in) { return f(in[0]); });
  }

  void binary(std::string unit, Shape a, Shape b, const std::function<Var<double>(Var<double>, Var<double>)>& f) {
    Rng rng = next_rng();
    check(std::move(unit), {random(a, rng), random(b, rng)}, {}, [&](Inputs in) { return f(in[0], in[1]); });
  }

  std::vector<GradCheckReport> take() { return std::move(reports_); }
  const GradientSuiteConfig& cfg() const { return cfg_; }

 private:
  GradientSuiteConfig cfg_;
  std::size_t counter_ = 0;
  std::vector<GradCheckReport> reports_;
};

template <typename P>
std::vector<Parameter<double>*> collect(P& p, const char* prefix) {
  ParameterRegistry<double> reg;
  p.collect(prefix, reg);
  std::vector<Parameter<double>*> out;
  for (const auto& e : reg.entries()) out.push_back(e.param);
  return out;
}

void op_units(Suite& s) {
  s.binary("matmul", {3, 4}, {4, 2}, [](auto a, auto b) { return matmul(a, b); });
  s.binary("bmm", {2, 3, 4}, {2, 4, 2}, [](auto a, auto b) { return bmm(a, b); });
  s.unary("transpose", {3, 2}, [](auto a) { return transpose(a); });
  s.binary("add", {3, 2}, {3, 2}, [](auto a, auto b) { return add(a, b); });
  s.binary("sub", {3, 2}, {3, 2}, [](auto a, auto b) { return sub(a, b); });
  s.binary("mul", {3, 2}, {3, 2}, [](auto a, auto b) { return mul(a, b); });
  s.binary("mul_scalar", {3, 2}, {1}, [](auto a, auto b) { return mul(a, b); });
  s.unary("affine", {3, 2}, [](auto a) { return affine(a, -1.5, 0.25); });
  s.binary("add_bias", {3, 4}, {4}, [](auto a, auto b) { return add_bias(a, b); });
  s.unary("sigmoid", {3, 4}, [](auto a) { return sigmoid(a); });
  s.unary("relu", {3, 4}, [](auto a) { return relu(a); }, true);
  s.unary("softmax", {3, 4}, [](auto a) { return softmax(a, 1); });
  s.unary("softmax_axis0", {3, 4}, [](auto a) { return softmax(a, 0); });
  s.unary("masked_softmax", {4, 4}, [&](auto a) {
    return masked_softmax(a, window_mask(4, 4, WindowSpec{s.cfg().window}));
  });
  s.unary("log_softmax", {3, 5}, [](auto a) { return log_softmax(a); });
  s.binary("concat", {2, 3}, {2, 2}, [](auto a, auto b) { return concat({a, b}, 1); });
  s.binary("stack", {2, 3}, {2, 3}, [](auto a, auto b) { return stack({a, b}, 1); });
  s.unary("slice", {4, 5}, [](auto a) { return slice(a, 1, 1, 3); });
  s.unary("reshape", {4, 3}, [](auto a) { return reshape(a, Shape{2, 6}); });
  s.unary("mean_pool", {4, 3}, [](auto a) { return mean_pool(a, 0); });
  s.unary("sum", {4, 3}, [](auto a) { return sum(a); });
  s.unary("gather", {5, 3}, [](auto a) {
    static const std::size_t idx[] = {1, 2, 0, 2, 1};
    return gather(a, std::span<const std::size_t>(idx));
  });
  {
    Rng rng = s.next_rng();
    Parameter<double> g(s.random({4}, rng, 0.5, 1.5)), b(s.random({4}, rng));
    s.check("layer_norm", {s.random({3, 4}, rng)}, {&g, &b}, [&](Inputs in) {
      Tape<double>& t = in[0].tape();
      return layer_norm(in[0], t.param(g), t.param(b));
    });
  }
  {
    Rng rng = s.next_rng();
    Parameter<double> k(s.random({3, 2, 3}, rng)), b(s.random({3}, rng));
    s.check("conv1d", {s.random({6, 2}, rng)}, {&k, &b}, [&](Inputs in) {
      Tape<double>& t = in[0].tape();
      return conv1d(in[0], t.param(k), t.param(b), 1, 2, 2);
    });
  }
  {
    Rng rng = s.next_rng();
    Parameter<double> k(s.random({3, 3, 2, 3}, rng)), b(s.random({3}, rng));
    s.check("conv2d", {s.random({2, 5, 5, 2}, rng)}, {&k, &b}, [&](Inputs in) {
      Tape<double>& t = in[0].tape();
      return conv2d(in[0], t.param(k), t.param(b), 2, 1);
    });
  }
  {
    Rng rng = s.next_rng();
    Parameter<double> w(s.random({4, 3}, rng)), b(s.random({3}, rng));
    s.check("linear", {s.random({2, 4}, rng)}, {&w, &b}, [&](Inputs in) {
      Tape<double>& t = in[0].tape();
      return linear(in[0], t.param(w), t.param(b));
    });
  }
}

void composite_units(Suite& s) {
  const GradientSuiteConfig& c = s.cfg();
  const Shape feat{c.snippets, c.channels};
  const WindowSpec w{c.window};
  {
    Rng rng = s.next_rng();
    auto p = AttentionParams<double>::init(c.channels, c.heads, rng);
    const Mask mask = window_mask(c.snippets, c.snippets, w);
    s.check("multi_head_attention", {s.random(feat, rng), s.random(feat, rng)}, collect(p, "mha"),
            [&](Inputs in) { return multi_head_attention(in[0], in[1], p, &mask); });
  }
  {
    Rng rng = s.next_rng();
    auto p = AttentionBlockParams<double>::init(c.channels, c.heads, rng);
    s.check("sa_block", {s.random(feat, rng)}, collect(p, "sa"), [&](Inputs in) { return sa_block(in[0], w, p); });
  }
  {
    Rng rng = s.next_rng();
    auto p = AttentionBlockParams<double>::init(c.channels, c.heads, rng);
    s.check("cma_block", {s.random(feat, rng), s.random(feat, rng)}, collect(p, "cma"),
            [&](Inputs in) { return add(cma_block(in[0], in[1], w, p), cma_block(in[1], in[0], w, p)); });
  }
  {
    Rng rng = s.next_rng();
    auto p = GateParams<double>::init(c.channels, rng);
    s.check("gated_parallel_fusion", {s.random(feat, rng), s.random(feat, rng)}, collect(p, "gate"),
            [&](Inputs in) { return gated_parallel_fusion(in[0], in[1], p); });
  }
  {
    Rng rng = s.next_rng();
    auto p = DilatedResidualParams<double>::init(c.channels, rng);
    s.check("dilated_residual_block", {s.random(feat, rng)}, collect(p, "temporal"),
            [&](Inputs in) { return dilated_residual_block(in[0], p, 2); });
  }
  {
    Rng rng = s.next_rng();
    auto p = LisfParams<double>::init(c.channels, c.heads, c.layers, w, false, rng);
    s.check("lisf", {s.random(feat, rng), s.random(feat, rng)}, collect(p, "lisf"), [&](Inputs in) {
      LisfOutput<double> out = lisf_forward(in[0], in[1], p);
      return concat({out.audio, out.visual}, 1);
    });
  }
  for (FusionStrategy strategy : kAllFusionStrategies) {
    Rng rng = s.next_rng();
    auto g = GlobalFusionParams<double>::init(c.channels, c.heads, rng);
    auto head = FusionHeadParams<double>::init(strategy, c.channels, 6, rng);
    auto params = collect(g, "glcf");
    for (auto* p : collect(head, "head")) params.push_back(p);
    s.check("glcf_" + std::string(to_string(strategy)), {s.random(feat, rng), s.random(feat, rng)}, params,
            [&](Inputs in) {
              auto [ea, ev] = global_complementary_fusion(in[0], in[1], g);
              return fuse_head(ea, ev, head);
            });
  }
  {
    Rng rng = s.next_rng();
    auto v = VisualStubParams<double>::init(c.channels, rng);
    auto a = AudioStubParams<double>::init(5, c.channels, rng);
    auto params = collect(v, "visual");
    for (auto* p : collect(a, "audio")) params.push_back(p);
    s.check("encoders", {s.random({4, 6, 6, 3}, rng), s.random({2, 6, 5}, rng)}, params, [&](Inputs in) {
      return concat({encode_visual(in[0], 2, v), encode_audio(in[1], a)}, 0);
    });
  }
  {
    Rng rng = s.next_rng();
    const PolarityMap pm = PolarityMap::six_emotions(0.7);
    std::vector<std::size_t> labels(c.snippets);
    for (auto& y : labels) y = static_cast<std::size_t>(rng.below(6));
    std::vector<Tensor<double>> logits;
    for (int i = 0; i < 3; ++i) logits.push_back(s.random({c.snippets, 6}, rng, -2, 2));
    s.check("ep_ce_multitask_loss", logits, {}, [&](Inputs in) {
      return multitask_loss(in[0], in[1], in[2], std::span<const std::size_t>(labels), pm, BranchWeights{1.0, 0.5, 0.25});
    });
  }
}

void fault_unit(Suite& s) {
  s.unary("faulty_scale", {3}, [](Var<double> x) {
    Tensor<double> out = x.value();
    for (auto& v : out.data()) v *= 2.0;
    return x.tape().record("faulty_scale", {x}, std::move(out), [](const BackwardArgs<double>& g) {
      for (std::size_t i = 0; i < g.grad_output.size(); ++i) (*g.grad_inputs[0])[i] += g.grad_output[i];
    });
  });
}

}  // namespace

std::vector<GradCheckReport> run_gradient_suite(const GradientSuiteConfig& cfg) {
  if (cfg.heads == 0 || cfg.channels % cfg.heads != 0) throw ConfigError("channels must be divisible by heads");
  if (cfg.snippets == 0 || cfg.layers == 0) throw ConfigError("snippets and layers must be positive");
  Suite s(cfg);
  op_units(s);
  composite_units(s);
  if (cfg.inject_fault) fault_unit(s);
  return s.take();
}

}  // namespace avf
