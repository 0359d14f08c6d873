// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "avf/tensor.hpp"

namespace avf {

/// Trainable tensor with its accumulated gradient. Gradients from every tape
/// the parameter takes part in are added into `grad` until `zero_grad()`.
template <typename T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  explicit Parameter(Tensor<T> v) : value(std::move(v)), grad(value.shape(), T(0)) {}

  void zero_grad() { grad.fill(T(0)); }
  std::size_t size() const { return value.size(); }
};

template <typename T>
class Tape;

/// Handle to one node of a tape. Cheap to copy; valid as long as the tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape<T>& tape() const;
  std::size_t id() const noexcept { return id_; }
  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  /// Gradient after backward(), or nullptr if none reached this node.
  const Tensor<T>* grad() const;

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// What a backward rule sees. `grad_inputs[i]` is null when input i does not
/// require a gradient; otherwise it is a zero-initialised (or partially
/// accumulated) buffer the rule must add into.
template <typename T>
struct BackwardArgs {
  std::span<const Tensor<T>* const> inputs;
  const Tensor<T>& output;
  const Tensor<T>& grad_output;
  std::span<Tensor<T>* const> grad_inputs;
};

template <typename T>
using BackwardFn = std::function<void(const BackwardArgs<T>&)>;

/// Append-only record of one forward pass.
///
/// Nodes are appended in evaluation order, so inputs always precede their
/// consumers; backward() walks the nodes in exact reverse append order. Each
/// recorded value is checked for NaN/Inf and a NumericalError naming the op
/// is thrown instead of letting the value propagate.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> input(Tensor<T> value, bool requires_grad = true);
  Var<T> constant(Tensor<T> value) { return input(std::move(value), false); }
  /// Leaf bound to a parameter. Repeated calls with the same parameter return
  /// the same node, so shared parameters accumulate into one gradient.
  Var<T> param(Parameter<T>& p);

  Var<T> record(std::string op, std::span<const Var<T>> inputs, Tensor<T> value, BackwardFn<T> backward);
  Var<T> record(std::string op, std::initializer_list<Var<T>> inputs, Tensor<T> value, BackwardFn<T> backward) {
    return record(std::move(op), std::span<const Var<T>>(inputs.begin(), inputs.size()), std::move(value),
                  std::move(backward));
  }

  /// Populates gradients of every requires-grad node reachable from `loss`
  /// and adds parameter-leaf gradients into their Parameter::grad.
  void backward(Var<T> loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  const Tensor<T>* grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  const std::string& op_name(std::size_t id) const { return nodes_.at(id).op; }
  const std::vector<std::size_t>& inputs_of(std::size_t id) const { return nodes_.at(id).inputs; }

 private:
  struct Node {
    std::string op;
    std::vector<std::size_t> inputs;
    Tensor<T> value;
    Tensor<T> grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn<T> backward;
    Parameter<T>* param = nullptr;
  };

  std::deque<Node> nodes_;  // deque: value() references survive later records
  std::unordered_map<const Parameter<T>*, std::size_t> param_nodes_;
  bool backward_done_ = false;
};

template <typename T>
Tape<T>& Var<T>::tape() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return *tape_;
}

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape().value(id_);
}

template <typename T>
const Tensor<T>* Var<T>::grad() const {
  return tape().grad(id_);
}

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace avf
