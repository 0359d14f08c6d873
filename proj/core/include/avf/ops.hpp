// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "avf/autograd.hpp"

namespace avf {

/// Boolean permission matrix for attention scores: `allowed(i, j)` says query
/// i may attend to key j.
struct Mask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> allowed;

  bool operator()(std::size_t i, std::size_t j) const { return allowed[i * cols + j] != 0; }
  static Mask full(std::size_t rows, std::size_t cols) { return Mask{rows, cols, std::vector<std::uint8_t>(rows * cols, 1)}; }
};

// Every op records one tape node with its backward rule. Broadcasting exists
// only where an op documents it.

/// [m x k] . [k x n]
template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
/// Batched [B x m x k] . [B x k x n]
template <typename T> Var<T> bmm(Var<T> a, Var<T> b);
/// 2-D transpose.
template <typename T> Var<T> transpose(Var<T> a);

template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
/// Elementwise product. Either operand may have exactly one element, in
/// which case it is broadcast as a scalar.
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
/// a * factor + shift with constant factor/shift.
template <typename T> Var<T> affine(Var<T> a, T factor, T shift = T(0));
template <typename T> Var<T> scale(Var<T> a, T factor) { return affine(a, factor, T(0)); }
/// x[..., n] + b[n], bias repeated over all leading positions.
template <typename T> Var<T> add_bias(Var<T> x, Var<T> b);

template <typename T> Var<T> sigmoid(Var<T> x);
template <typename T> Var<T> relu(Var<T> x);

/// Softmax along `axis` with max subtraction. -inf inputs give exactly 0; a
/// slice with no finite entry raises MaskingError.
template <typename T> Var<T> softmax(Var<T> x, std::size_t axis);
/// Row softmax of a 2-D [rows x cols] (or batched [B x rows x cols]) score
/// tensor where disallowed positions act as an additive -inf bias.
template <typename T> Var<T> masked_softmax(Var<T> x, const Mask& mask);
/// log(softmax(x)) along the last axis.
template <typename T> Var<T> log_softmax(Var<T> x);

template <typename T> Var<T> concat(std::span<const Var<T>> xs, std::size_t axis);
template <typename T> Var<T> concat(std::initializer_list<Var<T>> xs, std::size_t axis) {
  return concat(std::span<const Var<T>>(xs.begin(), xs.size()), axis);
}
/// Stacks equal-shape tensors along a new axis inserted at `axis`.
template <typename T> Var<T> stack(std::span<const Var<T>> xs, std::size_t axis);
template <typename T> Var<T> stack(std::initializer_list<Var<T>> xs, std::size_t axis) {
  return stack(std::span<const Var<T>>(xs.begin(), xs.size()), axis);
}
/// Contiguous range [start, start+len) along `axis`.
template <typename T> Var<T> slice(Var<T> x, std::size_t axis, std::size_t start, std::size_t len);
template <typename T> Var<T> reshape(Var<T> x, Shape shape);

/// Mean over `axis`; the axis is removed (a rank-1 input yields shape {1}).
template <typename T> Var<T> mean_pool(Var<T> x, std::size_t axis);
/// Sum of all elements, shape {1}.
template <typename T> Var<T> sum(Var<T> x);
/// Picks x[i, index[i]] from a [N x C] tensor, result shape {N}.
template <typename T> Var<T> gather(Var<T> x, std::span<const std::size_t> index);

/// Normalises over the last axis, then gain * xhat + bias (gain, bias: [n]).
template <typename T> Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps = T(1e-5));

/// 1-D convolution over [L x Cin] or [B x L x Cin] with kernel [K x Cin x Cout],
/// bias [Cout]. Zero padding of `padding` positions on both ends.
template <typename T>
Var<T> conv1d(Var<T> x, Var<T> kernel, Var<T> bias, std::size_t stride, std::size_t dilation, std::size_t padding);
/// 2-D convolution over [N x H x W x Cin] with kernel [K x K x Cin x Cout],
/// bias [Cout], symmetric zero padding.
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> kernel, Var<T> bias, std::size_t stride, std::size_t padding);

/// x . W + b for x [.. x in], W [in x out], b [out].
template <typename T>
Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias) {
  if (x.shape().size() == 2) return add_bias(matmul(x, weight), bias);
  const Shape s = x.shape();
  const std::size_t in = s.back();
  Var<T> flat = reshape(x, Shape{x.value().size() / in, in});
  Var<T> out = add_bias(matmul(flat, weight), bias);
  Shape os = s;
  os.back() = weight.shape()[1];
  return reshape(out, os);
}

}  // namespace avf
