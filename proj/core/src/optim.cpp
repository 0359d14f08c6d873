// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "avf/optim.hpp"

#include <cmath>

namespace avf {

void AdamWConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("learning rate must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(eps > 0)) throw ConfigError("Adam eps must be positive");
  if (!(weight_decay >= 0)) throw ConfigError("weight decay must be >= 0");
}

template <typename T>
AdamW<T>::AdamW(const ParameterRegistry<T>& params, AdamWConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  for (const auto& e : params.entries()) {
    params_.push_back(e.param);
    m_.emplace_back(e.param->size(), T(0));
    v_.emplace_back(e.param->size(), T(0));
  }
}

template <typename T>
void AdamW<T>::step(double grad_scale) {
  ++t_;
  const T lr = static_cast<T>(cfg_.lr);
  const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
  const T decay = static_cast<T>(1.0 - cfg_.lr * cfg_.weight_decay);
  const T c1 = static_cast<T>(1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
  const T c2 = static_cast<T>(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
  const T eps = static_cast<T>(cfg_.eps);
  const T gs = static_cast<T>(grad_scale);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter<T>& p = *params_[k];
    auto value = p.value.data();
    auto grad = p.grad.data();
    if (grad.size() != value.size()) throw ContractError("AdamW: gradient shape differs from parameter");
    std::vector<T>& m = m_[k];
    std::vector<T>& v = v_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const T g = grad[i] * gs;
      if (!std::isfinite(g)) throw NumericalError("AdamW: non-finite gradient");
      m[i] = b1 * m[i] + (T(1) - b1) * g;
      v[i] = b2 * v[i] + (T(1) - b2) * g * g;
      value[i] = value[i] * decay - lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace avf
