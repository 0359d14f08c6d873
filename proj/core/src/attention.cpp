// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "avf/attention.hpp"

#include <cmath>

namespace avf {

Mask window_mask(std::size_t queries, std::size_t keys, WindowSpec w) {
  Mask m{queries, keys, std::vector<std::uint8_t>(queries * keys, 0)};
  for (std::size_t i = 0; i < queries; ++i)
    for (std::size_t j = 0; j < keys; ++j) {
      const std::size_t dist = i > j ? i - j : j - i;
      m.allowed[i * keys + j] = dist <= w.half_width ? 1 : 0;
    }
  return m;
}

template <typename T>
AttentionParams<T> AttentionParams<T>::init(std::size_t channels, std::size_t heads, Rng& rng) {
  if (heads == 0 || channels % heads != 0) {
    throw ConfigError("channels (" + std::to_string(channels) + ") must be divisible by heads (" +
                      std::to_string(heads) + ")");
  }
  AttentionParams p;
  p.heads = heads;
  p.w_q = xavier<T>({channels, channels}, channels, channels, rng);
  p.w_k = xavier<T>({channels, channels}, channels, channels, rng);
  p.w_v = xavier<T>({channels, channels}, channels, channels, rng);
  p.w_o = xavier<T>({channels, channels}, channels, channels, rng);
  return p;
}

template <typename T>
void AttentionParams<T>::collect(const std::string& prefix, ParameterRegistry<T>& reg) {
  reg.add(prefix + ".w_q", w_q);
  reg.add(prefix + ".w_k", w_k);
  reg.add(prefix + ".w_v", w_v);
  reg.add(prefix + ".w_o", w_o);
}

template <typename T>
FeedForwardParams<T> FeedForwardParams<T>::init(std::size_t channels, Rng& rng) {
  FeedForwardParams p;
  p.w1 = xavier<T>({channels, 2 * channels}, channels, 2 * channels, rng);
  p.b1 = zeros<T>({2 * channels});
  p.w2 = xavier<T>({2 * channels, channels}, 2 * channels, channels, rng);
  p.b2 = zeros<T>({channels});
  return p;
}

template <typename T>
void FeedForwardParams<T>::collect(const std::string& prefix, ParameterRegistry<T>& reg) {
  reg.add(prefix + ".w1", w1);
  reg.add(prefix + ".b1", b1);
  reg.add(prefix + ".w2", w2);
  reg.add(prefix + ".b2", b2);
}

template <typename T>
AttentionBlockParams<T> AttentionBlockParams<T>::init(std::size_t channels, std::size_t heads, Rng& rng) {
  AttentionBlockParams p;
  p.attn = AttentionParams<T>::init(channels, heads, rng);
  p.ffn = FeedForwardParams<T>::init(channels, rng);
  p.ln_gain = constant_param<T>({channels}, T(1));
  p.ln_bias = zeros<T>({channels});
  return p;
}

template <typename T>
void AttentionBlockParams<T>::collect(const std::string& prefix, ParameterRegistry<T>& reg) {
  attn.collect(prefix + ".attn", reg);
  ffn.collect(prefix + ".ffn", reg);
  reg.add(prefix + ".ln_gain", ln_gain);
  reg.add(prefix + ".ln_bias", ln_bias);
}

template <typename T>
GateParams<T> GateParams<T>::init(std::size_t channels, Rng& rng) {
  GateParams g;
  g.w_s = xavier<T>({2 * channels, channels}, 2 * channels, channels, rng);
  g.b_s = zeros<T>({channels});
  g.w_c = xavier<T>({2 * channels, channels}, 2 * channels, channels, rng);
  g.b_c = zeros<T>({channels});
  return g;
}

template <typename T>
void GateParams<T>::collect(const std::string& prefix, ParameterRegistry<T>& reg) {
  reg.add(prefix + ".w_s", w_s);
  reg.add(prefix + ".b_s", b_s);
  reg.add(prefix + ".w_c", w_c);
  reg.add(prefix + ".b_c", b_c);
}

template <typename T>
DilatedResidualParams<T> DilatedResidualParams<T>::init(std::size_t channels, Rng& rng) {
  DilatedResidualParams p;
  p.kernel = xavier<T>({3, channels, channels}, 3 * channels, 3 * channels, rng);
  p.bias = zeros<T>({channels});
  return p;
}

template <typename T>
void DilatedResidualParams<T>::collect(const std::string& prefix, ParameterRegistry<T>& reg) {
  reg.add(prefix + ".kernel", kernel);
  reg.add(prefix + ".bias", bias);
}

template <typename T>
Var<T> att(Var<T> q, Var<T> k, Var<T> v, const Mask* mask, Tensor<T>* weights) {
  const std::size_t dk = q.shape().back();
  if (k.shape().back() != dk) throw DimensionError("att: query/key widths differ");
  Var<T> scores = scale(matmul(q, transpose(k)), T(1) / std::sqrt(static_cast<T>(dk)));
  Var<T> probs = mask ? masked_softmax(scores, *mask) : softmax(scores, 1);
  if (weights) *weights = probs.value();
  return matmul(probs, v);
}

template <typename T>
Var<T> multi_head_attention(Var<T> query_src, Var<T> kv_src, AttentionParams<T>& p, const Mask* mask,
                            AttentionTrace<T>* trace) {
  Tape<T>& tape = query_src.tape();
  const std::size_t c = p.channels();
  if (query_src.shape().size() != 2 || query_src.shape()[1] != c || kv_src.shape().size() != 2 ||
      kv_src.shape()[1] != c) {
    throw DimensionError("attention: inputs " + shape_str(query_src.shape()) + " / " + shape_str(kv_src.shape()) +
                         " do not match channel width " + std::to_string(c));
  }
  Var<T> q = matmul(query_src, tape.param(p.w_q));
  Var<T> k = matmul(kv_src, tape.param(p.w_k));
  Var<T> v = matmul(kv_src, tape.param(p.w_v));
  const std::size_t dk = p.head_dim();
  std::vector<Var<T>> heads;
  heads.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    Tensor<T> w;
    heads.push_back(att(slice(q, 1, h * dk, dk), slice(k, 1, h * dk, dk), slice(v, 1, h * dk, dk), mask,
                        trace ? &w : nullptr));
    if (trace) trace->head_weights.push_back(std::move(w));
  }
  Var<T> joined = p.heads == 1 ? heads.front() : concat(std::span<const Var<T>>(heads), 1);
  return matmul(joined, tape.param(p.w_o));
}

namespace {

template <typename T>
Var<T> attention_block(Var<T> f, Var<T> kv, WindowSpec w, AttentionBlockParams<T>& p, AttentionTrace<T>* trace) {
  Tape<T>& tape = f.tape();
  if (f.shape() != kv.shape()) {
    throw DimensionError("attention block: " + shape_str(f.shape()) + " vs " + shape_str(kv.shape()));
  }
  const std::size_t s = f.shape()[0];
  const Mask mask = window_mask(s, s, w);
  Var<T> h = add(f, multi_head_attention(f, kv, p.attn, &mask, trace));
  Var<T> hidden = relu(linear(h, tape.param(p.ffn.w1), tape.param(p.ffn.b1)));
  Var<T> ff = linear(hidden, tape.param(p.ffn.w2), tape.param(p.ffn.b2));
  return layer_norm(add(h, ff), tape.param(p.ln_gain), tape.param(p.ln_bias));
}

}  // namespace

template <typename T>
Var<T> sa_block(Var<T> f, WindowSpec w, AttentionBlockParams<T>& p, AttentionTrace<T>* trace) {
  return attention_block(f, f, w, p, trace);
}

template <typename T>
Var<T> cma_block(Var<T> f, Var<T> f_other, WindowSpec w, AttentionBlockParams<T>& p, AttentionTrace<T>* trace) {
  return attention_block(f, f_other, w, p, trace);
}

template <typename T>
Var<T> gated_parallel_fusion(Var<T> f_s, Var<T> f_c, GateParams<T>& g) {
  if (f_s.shape() != f_c.shape()) {
    throw DimensionError("gated fusion: " + shape_str(f_s.shape()) + " vs " + shape_str(f_c.shape()));
  }
  Tape<T>& tape = f_s.tape();
  Var<T> joined = concat({f_s, f_c}, 1);
  Var<T> gate_s = sigmoid(linear(joined, tape.param(g.w_s), tape.param(g.b_s)));
  Var<T> gate_c = sigmoid(linear(joined, tape.param(g.w_c), tape.param(g.b_c)));
  return add(mul(gate_s, f_s), mul(gate_c, f_c));
}

template <typename T>
Var<T> dilated_residual_block(Var<T> f, DilatedResidualParams<T>& p, std::size_t dilation) {
  if (dilation == 0) throw ConfigError("dilation must be positive");
  Tape<T>& tape = f.tape();
  Var<T> conv = conv1d(f, tape.param(p.kernel), tape.param(p.bias), 1, dilation, dilation);
  return add(f, relu(conv));
}

#define AVF_INSTANTIATE_ATTENTION(T)                                                                    \
  template struct AttentionParams<T>;                                                                   \
  template struct FeedForwardParams<T>;                                                                 \
  template struct AttentionBlockParams<T>;                                                              \
  template struct GateParams<T>;                                                                        \
  template struct DilatedResidualParams<T>;                                                             \
  template Var<T> att(Var<T>, Var<T>, Var<T>, const Mask*, Tensor<T>*);                                 \
  template Var<T> multi_head_attention(Var<T>, Var<T>, AttentionParams<T>&, const Mask*, AttentionTrace<T>*); \
  template Var<T> sa_block(Var<T>, WindowSpec, AttentionBlockParams<T>&, AttentionTrace<T>*);            \
  template Var<T> cma_block(Var<T>, Var<T>, WindowSpec, AttentionBlockParams<T>&, AttentionTrace<T>*);   \
  template Var<T> gated_parallel_fusion(Var<T>, Var<T>, GateParams<T>&);                                \
  template Var<T> dilated_residual_block(Var<T>, DilatedResidualParams<T>&, std::size_t);

AVF_INSTANTIATE_ATTENTION(float)
AVF_INSTANTIATE_ATTENTION(double)

}  // namespace avf
