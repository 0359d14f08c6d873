// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "avf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace avf {

namespace {

struct AxisSplit {
  std::size_t outer;
  std::size_t len;
  std::size_t inner;
};

AxisSplit split_at(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  AxisSplit r{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(s));
  }
}

void require_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b) throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

template <typename T>
void accumulate(Tensor<T>* dst, const Tensor<T>& src) {
  if (!dst) return;
  auto d = dst->data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

template <typename T>
Tape<T>& tape_of(std::span<const Var<T>> xs, const char* op) {
  if (xs.empty()) throw ContractError(std::string(op) + ": no inputs");
  return xs.front().tape();
}

}  // namespace

// ---- linear algebra -------------------------------------------------------

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  require_rank(A.shape(), 2, "matmul");
  require_rank(B.shape(), 2, "matmul");
  const std::size_t m = A.shape()[0], k = A.shape()[1], n = B.shape()[1];
  if (B.shape()[0] != k) {
    throw DimensionError("matmul: inner dimensions differ " + shape_str(A.shape()) + " x " + shape_str(B.shape()));
  }
  Tensor<T> C(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const T av = A[i * k + p];
      if (av == T(0)) continue;
      const T* brow = &B[p * n];
      T* crow = &C[i * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return a.tape().record("matmul", {a, b}, std::move(C), [m, k, n](const BackwardArgs<T>& g) {
    const Tensor<T>& A = *g.inputs[0];
    const Tensor<T>& B = *g.inputs[1];
    const Tensor<T>& dC = g.grad_output;
    if (Tensor<T>* dA = g.grad_inputs[0]) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          T acc = 0;
          for (std::size_t j = 0; j < n; ++j) acc += dC[i * n + j] * B[p * n + j];
          (*dA)[i * k + p] += acc;
        }
    }
    if (Tensor<T>* dB = g.grad_inputs[1]) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const T av = A[i * k + p];
          for (std::size_t j = 0; j < n; ++j) (*dB)[p * n + j] += av * dC[i * n + j];
        }
    }
  });
}

template <typename T>
Var<T> bmm(Var<T> a, Var<T> b) {
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  require_rank(A.shape(), 3, "bmm");
  require_rank(B.shape(), 3, "bmm");
  const std::size_t bs = A.shape()[0], m = A.shape()[1], k = A.shape()[2], n = B.shape()[2];
  if (B.shape()[0] != bs || B.shape()[1] != k) {
    throw DimensionError("bmm: incompatible " + shape_str(A.shape()) + " x " + shape_str(B.shape()));
  }
  Tensor<T> C(Shape{bs, m, n});
  for (std::size_t q = 0; q < bs; ++q)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const T av = A[(q * m + i) * k + p];
        for (std::size_t j = 0; j < n; ++j) C[(q * m + i) * n + j] += av * B[(q * k + p) * n + j];
      }
  return a.tape().record("bmm", {a, b}, std::move(C), [bs, m, k, n](const BackwardArgs<T>& g) {
    const Tensor<T>& A = *g.inputs[0];
    const Tensor<T>& B = *g.inputs[1];
    const Tensor<T>& dC = g.grad_output;
    Tensor<T>* dA = g.grad_inputs[0];
    Tensor<T>* dB = g.grad_inputs[1];
    for (std::size_t q = 0; q < bs; ++q)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          T acc = 0;
          const T av = A[(q * m + i) * k + p];
          for (std::size_t j = 0; j < n; ++j) {
            const T dc = dC[(q * m + i) * n + j];
            acc += dc * B[(q * k + p) * n + j];
            if (dB) (*dB)[(q * k + p) * n + j] += av * dc;
          }
          if (dA) (*dA)[(q * m + i) * k + p] += acc;
        }
  });
}

template <typename T>
Var<T> transpose(Var<T> a) {
  const Tensor<T>& A = a.value();
  require_rank(A.shape(), 2, "transpose");
  const std::size_t r = A.shape()[0], c = A.shape()[1];
  Tensor<T> out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = A[i * c + j];
  return a.tape().record("transpose", {a}, std::move(out), [r, c](const BackwardArgs<T>& g) {
    Tensor<T>* dA = g.grad_inputs[0];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) (*dA)[i * c + j] += g.grad_output[j * r + i];
  });
}

// ---- elementwise ------------------------------------------------------------

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same(a.shape(), b.shape(), "add");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return a.tape().record("add", {a, b}, std::move(out), [](const BackwardArgs<T>& g) {
    accumulate(g.grad_inputs[0], g.grad_output);
    accumulate(g.grad_inputs[1], g.grad_output);
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same(a.shape(), b.shape(), "sub");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape().record("sub", {a, b}, std::move(out), [](const BackwardArgs<T>& g) {
    accumulate(g.grad_inputs[0], g.grad_output);
    if (Tensor<T>* db = g.grad_inputs[1]) {
      for (std::size_t i = 0; i < db->size(); ++i) (*db)[i] -= g.grad_output[i];
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  if (A.shape() == B.shape()) {
    Tensor<T> out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
    return a.tape().record("mul", {a, b}, std::move(out), [](const BackwardArgs<T>& g) {
      const Tensor<T>& A = *g.inputs[0];
      const Tensor<T>& B = *g.inputs[1];
      if (Tensor<T>* da = g.grad_inputs[0])
        for (std::size_t i = 0; i < da->size(); ++i) (*da)[i] += g.grad_output[i] * B[i];
      if (Tensor<T>* db = g.grad_inputs[1])
        for (std::size_t i = 0; i < db->size(); ++i) (*db)[i] += g.grad_output[i] * A[i];
    });
  }
  if (B.size() != 1 && A.size() != 1) {
    throw DimensionError("mul: shape mismatch " + shape_str(A.shape()) + " vs " + shape_str(B.shape()));
  }
  // Scalar broadcast; keep the tensor operand first.
  const bool swap = B.size() != 1;
  Var<T> t = swap ? b : a;
  Var<T> s = swap ? a : b;
  const T sv = s.value()[0];
  Tensor<T> out = t.value();
  for (auto& v : out.data()) v *= sv;
  return a.tape().record("mul_scalar", {t, s}, std::move(out), [](const BackwardArgs<T>& g) {
    const Tensor<T>& X = *g.inputs[0];
    const T sv = (*g.inputs[1])[0];
    if (Tensor<T>* dx = g.grad_inputs[0])
      for (std::size_t i = 0; i < dx->size(); ++i) (*dx)[i] += g.grad_output[i] * sv;
    if (Tensor<T>* ds = g.grad_inputs[1]) {
      T acc = 0;
      for (std::size_t i = 0; i < X.size(); ++i) acc += g.grad_output[i] * X[i];
      (*ds)[0] += acc;
    }
  });
}

template <typename T>
Var<T> affine(Var<T> a, T factor, T shift) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v = v * factor + shift;
  return a.tape().record("affine", {a}, std::move(out), [factor](const BackwardArgs<T>& g) {
    Tensor<T>* da = g.grad_inputs[0];
    for (std::size_t i = 0; i < da->size(); ++i) (*da)[i] += g.grad_output[i] * factor;
  });
}

template <typename T>
Var<T> add_bias(Var<T> x, Var<T> b) {
  const Tensor<T>& X = x.value();
  const std::size_t n = X.shape().back();
  if (b.value().size() != n) {
    throw DimensionError("add_bias: bias " + shape_str(b.shape()) + " does not match " + shape_str(X.shape()));
  }
  Tensor<T> out = X;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i % n];
  return x.tape().record("add_bias", {x, b}, std::move(out), [n](const BackwardArgs<T>& g) {
    accumulate(g.grad_inputs[0], g.grad_output);
    if (Tensor<T>* db = g.grad_inputs[1])
      for (std::size_t i = 0; i < g.grad_output.size(); ++i) (*db)[i % n] += g.grad_output[i];
  });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  Tensor<T> out = x.value();
  for (auto& v : out.data()) {
    if (v >= T(0)) {
      v = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      v = e / (T(1) + e);
    }
  }
  return x.tape().record("sigmoid", {x}, std::move(out), [](const BackwardArgs<T>& g) {
    Tensor<T>* dx = g.grad_inputs[0];
    for (std::size_t i = 0; i < dx->size(); ++i) {
      const T y = g.output[i];
      (*dx)[i] += g.grad_output[i] * y * (T(1) - y);
    }
  });
}

template <typename T>
Var<T> relu(Var<T> x) {
  Tensor<T> out = x.value();
  for (auto& v : out.data()) v = v > T(0) ? v : T(0);
  return x.tape().record("relu", {x}, std::move(out), [](const BackwardArgs<T>& g) {
    Tensor<T>* dx = g.grad_inputs[0];
    const Tensor<T>& X = *g.inputs[0];
    for (std::size_t i = 0; i < dx->size(); ++i)
      if (X[i] > T(0)) (*dx)[i] += g.grad_output[i];
  });
}

// ---- softmax family -----------------------------------------------------------

namespace {

// y = softmax over a strided slice; entries with allowed(j) == false are 0.
template <typename T, typename Allowed>
void softmax_slice(const T* x, T* y, std::size_t len, std::size_t stride, Allowed allowed, const char* op) {
  T mx = -std::numeric_limits<T>::infinity();
  for (std::size_t j = 0; j < len; ++j) {
    const T v = x[j * stride];
    if (allowed(j) && v > mx) mx = v;
  }
  if (!std::isfinite(mx)) throw MaskingError(std::string(op) + ": slice with no permitted entries");
  T total = 0;
  for (std::size_t j = 0; j < len; ++j) {
    const T v = x[j * stride];
    const T e = (allowed(j) && v != -std::numeric_limits<T>::infinity()) ? std::exp(v - mx) : T(0);
    y[j * stride] = e;
    total += e;
  }
  for (std::size_t j = 0; j < len; ++j) y[j * stride] /= total;
}

template <typename T>
void softmax_backward_slice(const T* y, const T* dy, T* dx, std::size_t len, std::size_t stride) {
  T dot = 0;
  for (std::size_t j = 0; j < len; ++j) dot += dy[j * stride] * y[j * stride];
  for (std::size_t j = 0; j < len; ++j) dx[j * stride] += y[j * stride] * (dy[j * stride] - dot);
}

}  // namespace

template <typename T>
Var<T> softmax(Var<T> x, std::size_t axis) {
  const Tensor<T>& X = x.value();
  const AxisSplit sp = split_at(X.shape(), axis, "softmax");
  Tensor<T> out(X.shape());
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.len * sp.inner + i;
      softmax_slice(&X[base], &out[base], sp.len, sp.inner, [](std::size_t) { return true; }, "softmax");
    }
  return x.tape().record("softmax", {x}, std::move(out), [sp](const BackwardArgs<T>& g) {
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const std::size_t base = o * sp.len * sp.inner + i;
        softmax_backward_slice(&g.output[base], &g.grad_output[base], &(*g.grad_inputs[0])[base], sp.len, sp.inner);
      }
  });
}

template <typename T>
Var<T> masked_softmax(Var<T> x, const Mask& mask) {
  const Tensor<T>& X = x.value();
  const Shape& s = X.shape();
  if (s.size() < 2 || s[s.size() - 2] != mask.rows || s.back() != mask.cols) {
    throw DimensionError("masked_softmax: scores " + shape_str(s) + " vs mask [" + std::to_string(mask.rows) + "x" +
                         std::to_string(mask.cols) + "]");
  }
  const std::size_t rows = X.size() / mask.cols;
  const std::size_t cols = mask.cols;
  Tensor<T> out(s);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t mr = r % mask.rows;
    softmax_slice(&X[r * cols], &out[r * cols], cols, 1, [&](std::size_t j) { return mask(mr, j); },
                  "masked_softmax");
  }
  return x.tape().record("masked_softmax", {x}, std::move(out), [rows, cols](const BackwardArgs<T>& g) {
    for (std::size_t r = 0; r < rows; ++r)
      softmax_backward_slice(&g.output[r * cols], &g.grad_output[r * cols], &(*g.grad_inputs[0])[r * cols], cols, 1);
  });
}

template <typename T>
Var<T> log_softmax(Var<T> x) {
  const Tensor<T>& X = x.value();
  const std::size_t cols = X.shape().back();
  const std::size_t rows = X.size() / cols;
  Tensor<T> out(X.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = &X[r * cols];
    const T mx = *std::max_element(xr, xr + cols);
    T total = 0;
    for (std::size_t j = 0; j < cols; ++j) total += std::exp(xr[j] - mx);
    const T lse = mx + std::log(total);
    for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = xr[j] - lse;
  }
  return x.tape().record("log_softmax", {x}, std::move(out), [rows, cols](const BackwardArgs<T>& g) {
    Tensor<T>* dx = g.grad_inputs[0];
    for (std::size_t r = 0; r < rows; ++r) {
      T total = 0;
      for (std::size_t j = 0; j < cols; ++j) total += g.grad_output[r * cols + j];
      for (std::size_t j = 0; j < cols; ++j)
        (*dx)[r * cols + j] += g.grad_output[r * cols + j] - std::exp(g.output[r * cols + j]) * total;
    }
  });
}

// ---- structural -------------------------------------------------------------------

template <typename T>
Var<T> concat(std::span<const Var<T>> xs, std::size_t axis) {
  Tape<T>& tape = tape_of(xs, "concat");
  const Shape& s0 = xs.front().shape();
  if (axis >= s0.size()) throw DimensionError("concat: axis out of range for " + shape_str(s0));
  Shape os = s0;
  os[axis] = 0;
  std::vector<std::size_t> lens;
  for (const Var<T>& v : xs) {
    const Shape& s = v.shape();
    if (s.size() != s0.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d)
      if (d != axis && s[d] != s0[d]) throw DimensionError("concat: " + shape_str(s) + " vs " + shape_str(s0));
    lens.push_back(s[axis]);
    os[axis] += s[axis];
  }
  const AxisSplit sp = split_at(os, axis, "concat");
  Tensor<T> out(os);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const Tensor<T>& X = xs[k].value();
    const std::size_t block = lens[k] * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o)
      std::copy_n(&X[o * block], block, &out[o * sp.len * sp.inner + offset]);
    offset += block;
  }
  return tape.record("concat", xs, std::move(out), [sp, lens](const BackwardArgs<T>& g) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < lens.size(); ++k) {
      const std::size_t block = lens[k] * sp.inner;
      if (Tensor<T>* dx = g.grad_inputs[k]) {
        for (std::size_t o = 0; o < sp.outer; ++o)
          for (std::size_t i = 0; i < block; ++i) (*dx)[o * block + i] += g.grad_output[o * sp.len * sp.inner + offset + i];
      }
      offset += block;
    }
  });
}

template <typename T>
Var<T> stack(std::span<const Var<T>> xs, std::size_t axis) {
  Tape<T>& tape = tape_of(xs, "stack");
  const Shape& s0 = xs.front().shape();
  if (axis > s0.size()) throw DimensionError("stack: axis out of range for " + shape_str(s0));
  for (const Var<T>& v : xs) require_same(v.shape(), s0, "stack");
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s0[d];
  for (std::size_t d = axis; d < s0.size(); ++d) inner *= s0[d];
  Shape os = s0;
  os.insert(os.begin() + static_cast<std::ptrdiff_t>(axis), xs.size());
  const std::size_t n = xs.size();
  Tensor<T> out(os);
  for (std::size_t k = 0; k < n; ++k) {
    const Tensor<T>& X = xs[k].value();
    for (std::size_t o = 0; o < outer; ++o) std::copy_n(&X[o * inner], inner, &out[(o * n + k) * inner]);
  }
  return tape.record("stack", xs, std::move(out), [outer, inner, n](const BackwardArgs<T>& g) {
    for (std::size_t k = 0; k < n; ++k) {
      Tensor<T>* dx = g.grad_inputs[k];
      if (!dx) continue;
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) (*dx)[o * inner + i] += g.grad_output[(o * n + k) * inner + i];
    }
  });
}

template <typename T>
Var<T> slice(Var<T> x, std::size_t axis, std::size_t start, std::size_t len) {
  const Tensor<T>& X = x.value();
  const AxisSplit sp = split_at(X.shape(), axis, "slice");
  if (len == 0 || start + len > sp.len) {
    throw DimensionError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + len) +
                         ") exceeds axis of length " + std::to_string(sp.len));
  }
  Shape os = X.shape();
  os[axis] = len;
  Tensor<T> out(os);
  const std::size_t block = len * sp.inner;
  for (std::size_t o = 0; o < sp.outer; ++o)
    std::copy_n(&X[(o * sp.len + start) * sp.inner], block, &out[o * block]);
  return x.tape().record("slice", {x}, std::move(out), [sp, start, block](const BackwardArgs<T>& g) {
    Tensor<T>* dx = g.grad_inputs[0];
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t i = 0; i < block; ++i) (*dx)[(o * sp.len + start) * sp.inner + i] += g.grad_output[o * block + i];
  });
}

template <typename T>
Var<T> reshape(Var<T> x, Shape shape) {
  Tensor<T> out = x.value().reshaped(std::move(shape));
  return x.tape().record("reshape", {x}, std::move(out),
                         [](const BackwardArgs<T>& g) { accumulate(g.grad_inputs[0], g.grad_output); });
}

// ---- reductions ---------------------------------------------------------------------

template <typename T>
Var<T> mean_pool(Var<T> x, std::size_t axis) {
  const Tensor<T>& X = x.value();
  const AxisSplit sp = split_at(X.shape(), axis, "mean_pool");
  Shape os = X.shape();
  os.erase(os.begin() + static_cast<std::ptrdiff_t>(axis));
  if (os.empty()) os = Shape{1};
  Tensor<T> out(os);
  const T inv = T(1) / static_cast<T>(sp.len);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t j = 0; j < sp.len; ++j)
      for (std::size_t i = 0; i < sp.inner; ++i) out[o * sp.inner + i] += X[(o * sp.len + j) * sp.inner + i];
  for (auto& v : out.data()) v *= inv;
  return x.tape().record("mean_pool", {x}, std::move(out), [sp, inv](const BackwardArgs<T>& g) {
    Tensor<T>* dx = g.grad_inputs[0];
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t j = 0; j < sp.len; ++j)
        for (std::size_t i = 0; i < sp.inner; ++i) (*dx)[(o * sp.len + j) * sp.inner + i] += g.grad_output[o * sp.inner + i] * inv;
  });
}

template <typename T>
Var<T> sum(Var<T> x) {
  T total = 0;
  for (T v : x.value().data()) total += v;
  return x.tape().record("sum", {x}, Tensor<T>::scalar(total), [](const BackwardArgs<T>& g) {
    Tensor<T>* dx = g.grad_inputs[0];
    const T d = g.grad_output[0];
    for (auto& v : dx->data()) v += d;
  });
}

template <typename T>
Var<T> gather(Var<T> x, std::span<const std::size_t> index) {
  const Tensor<T>& X = x.value();
  require_rank(X.shape(), 2, "gather");
  const std::size_t n = X.shape()[0], c = X.shape()[1];
  if (index.size() != n) throw DimensionError("gather: index count does not match rows");
  std::vector<std::size_t> idx(index.begin(), index.end());
  Tensor<T> out(Shape{n});
  for (std::size_t i = 0; i < n; ++i) {
    if (idx[i] >= c) throw DimensionError("gather: index " + std::to_string(idx[i]) + " out of range");
    out[i] = X[i * c + idx[i]];
  }
  return x.tape().record("gather", {x}, std::move(out), [idx, c](const BackwardArgs<T>& g) {
    Tensor<T>* dx = g.grad_inputs[0];
    for (std::size_t i = 0; i < idx.size(); ++i) (*dx)[i * c + idx[i]] += g.grad_output[i];
  });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps) {
  const Tensor<T>& X = x.value();
  const std::size_t n = X.shape().back();
  if (gain.value().size() != n || bias.value().size() != n) {
    throw DimensionError("layer_norm: gain/bias do not match last axis of " + shape_str(X.shape()));
  }
  const std::size_t rows = X.size() / n;
  Tensor<T> out(X.shape());
  Tensor<T> xhat(X.shape());
  std::vector<T> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = &X[r * n];
    T mean = 0;
    for (std::size_t j = 0; j < n; ++j) mean += xr[j];
    mean /= static_cast<T>(n);
    T var = 0;
    for (std::size_t j = 0; j < n; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<T>(n);
    inv_std[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[r * n + j] = (xr[j] - mean) * inv_std[r];
      out[r * n + j] = gain.value()[j] * xhat[r * n + j] + bias.value()[j];
    }
  }
  return x.tape().record("layer_norm", {x, gain, bias}, std::move(out),
                         [rows, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](const BackwardArgs<T>& g) {
                           const Tensor<T>& G = *g.inputs[1];
                           Tensor<T>* dx = g.grad_inputs[0];
                           Tensor<T>* dg = g.grad_inputs[1];
                           Tensor<T>* db = g.grad_inputs[2];
                           std::vector<T> dxhat(n);
                           for (std::size_t r = 0; r < rows; ++r) {
                             T m1 = 0, m2 = 0;
                             for (std::size_t j = 0; j < n; ++j) {
                               const T dy = g.grad_output[r * n + j];
                               if (dg) (*dg)[j] += dy * xhat[r * n + j];
                               if (db) (*db)[j] += dy;
                               dxhat[j] = dy * G[j];
                               m1 += dxhat[j];
                               m2 += dxhat[j] * xhat[r * n + j];
                             }
                             if (!dx) continue;
                             m1 /= static_cast<T>(n);
                             m2 /= static_cast<T>(n);
                             for (std::size_t j = 0; j < n; ++j)
                               (*dx)[r * n + j] += inv_std[r] * (dxhat[j] - m1 - xhat[r * n + j] * m2);
                           }
                         });
}

// ---- convolutions -------------------------------------------------------------------

template <typename T>
Var<T> conv1d(Var<T> x, Var<T> kernel, Var<T> bias, std::size_t stride, std::size_t dilation, std::size_t padding) {
  const Tensor<T>& X = x.value();
  const Tensor<T>& W = kernel.value();
  if (X.rank() != 2 && X.rank() != 3) throw DimensionError("conv1d: input must be [L x C] or [B x L x C]");
  require_rank(W.shape(), 3, "conv1d");
  if (stride == 0 || dilation == 0) throw DimensionError("conv1d: stride and dilation must be positive");
  const bool batched = X.rank() == 3;
  const std::size_t B = batched ? X.shape()[0] : 1;
  const std::size_t L = X.shape()[batched ? 1 : 0];
  const std::size_t cin = X.shape().back();
  const std::size_t K = W.shape()[0], cout = W.shape()[2];
  if (W.shape()[1] != cin) throw DimensionError("conv1d: kernel " + shape_str(W.shape()) + " vs input " + shape_str(X.shape()));
  if (bias.value().size() != cout) throw DimensionError("conv1d: bias size mismatch");
  const std::size_t span_len = dilation * (K - 1) + 1;
  if (L + 2 * padding < span_len) throw DimensionError("conv1d: input shorter than kernel span");
  const std::size_t lout = (L + 2 * padding - span_len) / stride + 1;
  Shape os = batched ? Shape{B, lout, cout} : Shape{lout, cout};
  Tensor<T> out(os);
  auto in_pos = [=](std::size_t t, std::size_t k) -> long {
    return static_cast<long>(t * stride + k * dilation) - static_cast<long>(padding);
  };
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < lout; ++t) {
      T* o = &out[(b * lout + t) * cout];
      for (std::size_t co = 0; co < cout; ++co) o[co] = bias.value()[co];
      for (std::size_t k = 0; k < K; ++k) {
        const long p = in_pos(t, k);
        if (p < 0 || p >= static_cast<long>(L)) continue;
        const T* xr = &X[(b * L + static_cast<std::size_t>(p)) * cin];
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const T xv = xr[ci];
          const T* wr = &W[(k * cin + ci) * cout];
          for (std::size_t co = 0; co < cout; ++co) o[co] += xv * wr[co];
        }
      }
    }
  return x.tape().record("conv1d", {x, kernel, bias}, std::move(out), [=](const BackwardArgs<T>& g) {
    const Tensor<T>& X = *g.inputs[0];
    const Tensor<T>& W = *g.inputs[1];
    Tensor<T>* dx = g.grad_inputs[0];
    Tensor<T>* dw = g.grad_inputs[1];
    Tensor<T>* db = g.grad_inputs[2];
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < lout; ++t) {
        const T* go = &g.grad_output[(b * lout + t) * cout];
        if (db)
          for (std::size_t co = 0; co < cout; ++co) (*db)[co] += go[co];
        for (std::size_t k = 0; k < K; ++k) {
          const long p = in_pos(t, k);
          if (p < 0 || p >= static_cast<long>(L)) continue;
          const std::size_t row = (b * L + static_cast<std::size_t>(p)) * cin;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const std::size_t wrow = (k * cin + ci) * cout;
            T acc = 0;
            for (std::size_t co = 0; co < cout; ++co) {
              acc += go[co] * W[wrow + co];
              if (dw) (*dw)[wrow + co] += go[co] * X[row + ci];
            }
            if (dx) (*dx)[row + ci] += acc;
          }
        }
      }
  });
}

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> kernel, Var<T> bias, std::size_t stride, std::size_t padding) {
  const Tensor<T>& X = x.value();
  const Tensor<T>& W = kernel.value();
  require_rank(X.shape(), 4, "conv2d");
  require_rank(W.shape(), 4, "conv2d");
  if (stride == 0) throw DimensionError("conv2d: stride must be positive");
  const std::size_t N = X.shape()[0], H = X.shape()[1], Wd = X.shape()[2], cin = X.shape()[3];
  const std::size_t K = W.shape()[0], cout = W.shape()[3];
  if (W.shape()[1] != K || W.shape()[2] != cin) {
    throw DimensionError("conv2d: kernel " + shape_str(W.shape()) + " vs input " + shape_str(X.shape()));
  }
  if (bias.value().size() != cout) throw DimensionError("conv2d: bias size mismatch");
  if (H + 2 * padding < K || Wd + 2 * padding < K) throw DimensionError("conv2d: input smaller than kernel");
  const std::size_t ho = (H + 2 * padding - K) / stride + 1;
  const std::size_t wo = (Wd + 2 * padding - K) / stride + 1;
  Tensor<T> out(Shape{N, ho, wo, cout});
  // Visits every (output pixel, kernel tap) pair that lands inside the input.
  auto for_taps = [=](auto&& fn) {
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox)
          for (std::size_t ky = 0; ky < K; ++ky) {
            const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(padding);
            if (iy < 0 || iy >= static_cast<long>(H)) continue;
            for (std::size_t kx = 0; kx < K; ++kx) {
              const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(padding);
              if (ix < 0 || ix >= static_cast<long>(Wd)) continue;
              const std::size_t in_off = ((n * H + static_cast<std::size_t>(iy)) * Wd + static_cast<std::size_t>(ix)) * cin;
              const std::size_t out_off = ((n * ho + oy) * wo + ox) * cout;
              const std::size_t w_off = (ky * K + kx) * cin * cout;
              fn(in_off, out_off, w_off);
            }
          }
  };
  for (std::size_t p = 0; p < N * ho * wo; ++p)
    for (std::size_t co = 0; co < cout; ++co) out[p * cout + co] = bias.value()[co];
  for_taps([&](std::size_t in_off, std::size_t out_off, std::size_t w_off) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T xv = X[in_off + ci];
      const T* wr = &W[w_off + ci * cout];
      T* o = &out[out_off];
      for (std::size_t co = 0; co < cout; ++co) o[co] += xv * wr[co];
    }
  });
  return x.tape().record("conv2d", {x, kernel, bias}, std::move(out), [=](const BackwardArgs<T>& g) {
    const Tensor<T>& X = *g.inputs[0];
    const Tensor<T>& W = *g.inputs[1];
    Tensor<T>* dx = g.grad_inputs[0];
    Tensor<T>* dw = g.grad_inputs[1];
    Tensor<T>* db = g.grad_inputs[2];
    if (db)
      for (std::size_t p = 0; p < N * ho * wo; ++p)
        for (std::size_t co = 0; co < cout; ++co) (*db)[co] += g.grad_output[p * cout + co];
    for_taps([&](std::size_t in_off, std::size_t out_off, std::size_t w_off) {
      const T* go = &g.grad_output[out_off];
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const std::size_t wrow = w_off + ci * cout;
        T acc = 0;
        for (std::size_t co = 0; co < cout; ++co) {
          acc += go[co] * W[wrow + co];
          if (dw) (*dw)[wrow + co] += go[co] * X[in_off + ci];
        }
        if (dx) (*dx)[in_off + ci] += acc;
      }
    });
  });
}

#define AVF_INSTANTIATE_OPS(T)                                                                      \
  template Var<T> matmul(Var<T>, Var<T>);                                                           \
  template Var<T> bmm(Var<T>, Var<T>);                                                              \
  template Var<T> transpose(Var<T>);                                                                \
  template Var<T> add(Var<T>, Var<T>);                                                              \
  template Var<T> sub(Var<T>, Var<T>);                                                              \
  template Var<T> mul(Var<T>, Var<T>);                                                              \
  template Var<T> affine(Var<T>, T, T);                                                             \
  template Var<T> add_bias(Var<T>, Var<T>);                                                         \
  template Var<T> sigmoid(Var<T>);                                                                  \
  template Var<T> relu(Var<T>);                                                                     \
  template Var<T> softmax(Var<T>, std::size_t);                                                     \
  template Var<T> masked_softmax(Var<T>, const Mask&);                                              \
  template Var<T> log_softmax(Var<T>);                                                              \
  template Var<T> concat(std::span<const Var<T>>, std::size_t);                                     \
  template Var<T> stack(std::span<const Var<T>>, std::size_t);                                      \
  template Var<T> slice(Var<T>, std::size_t, std::size_t, std::size_t);                             \
  template Var<T> reshape(Var<T>, Shape);                                                           \
  template Var<T> mean_pool(Var<T>, std::size_t);                                                   \
  template Var<T> sum(Var<T>);                                                                      \
  template Var<T> gather(Var<T>, std::span<const std::size_t>);                                     \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                                            \
  template Var<T> conv1d(Var<T>, Var<T>, Var<T>, std::size_t, std::size_t, std::size_t);            \
  template Var<T> conv2d(Var<T>, Var<T>, Var<T>, std::size_t, std::size_t);

AVF_INSTANTIATE_OPS(float)
AVF_INSTANTIATE_OPS(double)

}  // namespace avf
