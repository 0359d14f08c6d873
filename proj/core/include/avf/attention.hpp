// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "avf/ops.hpp"
#include "avf/parameters.hpp"

namespace avf {

/// Half-width d of the snippet interaction window: query t sees keys
/// max(0, t-d) .. min(s-1, t+d). A width >= s-1 covers the whole sequence.
struct WindowSpec {
  std::size_t half_width = 1;
};

Mask window_mask(std::size_t queries, std::size_t keys, WindowSpec w);

/// Multi-head projections. W_q, W_k, W_v, W_o are C x C; each head uses a
/// contiguous C / heads slice of the projected channels.
template <typename T>
struct AttentionParams {
  std::size_t heads = 1;
  Parameter<T> w_q, w_k, w_v, w_o;

  static AttentionParams init(std::size_t channels, std::size_t heads, Rng& rng);
  std::size_t channels() const { return w_q.value.shape()[0]; }
  std::size_t head_dim() const { return channels() / heads; }
  void collect(const std::string& prefix, ParameterRegistry<T>& reg);
};

/// Two-layer feed-forward C -> 2C -> C with ReLU.
template <typename T>
struct FeedForwardParams {
  Parameter<T> w1, b1, w2, b2;

  static FeedForwardParams init(std::size_t channels, Rng& rng);
  void collect(const std::string& prefix, ParameterRegistry<T>& reg);
};

/// A complete SA or CMA block: attention, feed-forward, residual, LayerNorm.
template <typename T>
struct AttentionBlockParams {
  AttentionParams<T> attn;
  FeedForwardParams<T> ffn;
  Parameter<T> ln_gain, ln_bias;

  static AttentionBlockParams init(std::size_t channels, std::size_t heads, Rng& rng);
  void collect(const std::string& prefix, ParameterRegistry<T>& reg);
};

/// Channel gates for the parallel SA/CMA fusion; maps 2C -> C.
template <typename T>
struct GateParams {
  Parameter<T> w_s, b_s, w_c, b_c;

  static GateParams init(std::size_t channels, Rng& rng);
  void collect(const std::string& prefix, ParameterRegistry<T>& reg);
};

/// Kernel-3 temporal convolution, C -> C.
template <typename T>
struct DilatedResidualParams {
  Parameter<T> kernel, bias;

  static DilatedResidualParams init(std::size_t channels, Rng& rng);
  void collect(const std::string& prefix, ParameterRegistry<T>& reg);
};

/// Optional capture of the per-head softmax weights of a forward pass.
template <typename T>
struct AttentionTrace {
  std::vector<Tensor<T>> head_weights;
};

/// softmax(q k^T / sqrt(d_k) + bias) v for one head; q [sq x dk], k/v
/// [sk x dk]. Disallowed mask positions receive a -inf bias. A null mask
/// means unrestricted attention.
template <typename T>
Var<T> att(Var<T> q, Var<T> k, Var<T> v, const Mask* mask, Tensor<T>* weights = nullptr);

/// Queries from `query_src`, keys and values from `kv_src`; heads are
/// concatenated and projected by W_o.
template <typename T>
Var<T> multi_head_attention(Var<T> query_src, Var<T> kv_src, AttentionParams<T>& p, const Mask* mask,
                            AttentionTrace<T>* trace = nullptr);

/// Windowed self-attention block over F [s x C]:
///   h = F + MHA(F, F);  out = LN(h + FFN(h)).
template <typename T>
Var<T> sa_block(Var<T> f, WindowSpec w, AttentionBlockParams<T>& p, AttentionTrace<T>* trace = nullptr);

/// Windowed cross-modal block: queries from `f`, keys/values from `f_other`.
/// The same parameter object serves both directions.
template <typename T>
Var<T> cma_block(Var<T> f, Var<T> f_other, WindowSpec w, AttentionBlockParams<T>& p,
                 AttentionTrace<T>* trace = nullptr);

/// sigmoid([F_s|F_c] W_s + b_s) * F_s + sigmoid([F_s|F_c] W_c + b_c) * F_c
template <typename T>
Var<T> gated_parallel_fusion(Var<T> f_s, Var<T> f_c, GateParams<T>& g);

/// F + ReLU(conv1d(F; kernel 3, given dilation, same padding)). Taps that
/// fall outside the sequence read zeros, so dilation >= s leaves only the
/// centre tap (a pointwise transform).
template <typename T>
Var<T> dilated_residual_block(Var<T> f, DilatedResidualParams<T>& p, std::size_t dilation);

}  // namespace avf
