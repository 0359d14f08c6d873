// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "avf/autograd.hpp"

#include <cmath>

namespace avf {

template <typename T>
Var<T> Tape<T>::input(Tensor<T> value, bool requires_grad) {
  for (T v : value.data()) {
    if (std::isnan(v)) throw NumericalError("NaN in tape input");
  }
  Node n;
  n.op = requires_grad ? "input" : "constant";
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::param(Parameter<T>& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var<T>(this, it->second);
  if (!p.value.all_finite()) throw NumericalError("non-finite parameter value");
  if (p.grad.shape() != p.value.shape()) p.grad = Tensor<T>(p.value.shape(), T(0));
  Node n;
  n.op = "param";
  n.value = p.value;
  n.requires_grad = true;
  n.param = &p;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::record(std::string op, std::span<const Var<T>> inputs, Tensor<T> value, BackwardFn<T> backward) {
  if (!value.all_finite()) {
    throw NumericalError("op '" + op + "' produced a non-finite value " + shape_str(value.shape()));
  }
  Node n;
  n.op = std::move(op);
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const Var<T>& in : inputs) {
    if (&in.tape() != this) throw ContractError("op '" + n.op + "' mixes tapes");
    n.inputs.push_back(in.id());
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
const Tensor<T>* Tape<T>::grad(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.has_grad ? &n.grad : nullptr;
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (&loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
  if (backward_done_) throw ContractError("backward: tape already consumed");
  Node& root = nodes_.at(loss.id());
  if (root.value.size() != 1) {
    throw ContractError("backward: loss must be scalar, got " + shape_str(root.value.shape()));
  }
  if (!root.requires_grad) throw ContractError("backward: loss does not depend on any trainable value");
  backward_done_ = true;

  root.grad = Tensor<T>(root.value.shape(), T(1));
  root.has_grad = true;

  std::vector<const Tensor<T>*> in_values;
  std::vector<Tensor<T>*> in_grads;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.backward) continue;
    in_values.clear();
    in_grads.clear();
    for (std::size_t in : n.inputs) {
      Node& src = nodes_[in];
      in_values.push_back(&src.value);
      if (src.requires_grad) {
        if (!src.has_grad) {
          src.grad = Tensor<T>(src.value.shape(), T(0));
          src.has_grad = true;
        }
        in_grads.push_back(&src.grad);
      } else {
        in_grads.push_back(nullptr);
      }
    }
    n.backward(BackwardArgs<T>{in_values, n.value, n.grad, in_grads});
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      if (in_grads[k] && !in_grads[k]->all_finite()) {
        throw NumericalError("backward of op '" + n.op + "' produced a non-finite gradient");
      }
    }
  }

  for (Node& n : nodes_) {
    if (!n.param || !n.has_grad) continue;
    auto dst = n.param->grad.data();
    auto src = n.grad.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace avf
