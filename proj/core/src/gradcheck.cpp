// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "avf/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "avf/ops.hpp"
#include "avf/rng.hpp"

namespace avf {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

Var<double> random_projection(Var<double> x, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> r(x.shape());
  for (auto& v : r.data()) v = rng.uniform(-1.0, 1.0);
  return sum(mul(x, x.tape().constant(std::move(r))));
}

namespace {

double evaluate(const std::vector<Tensor<double>>& inputs, const LossBuilder& build) {
  Tape<double> tape;
  std::vector<Var<double>> leaves;
  leaves.reserve(inputs.size());
  for (const auto& t : inputs) leaves.push_back(tape.input(t, true));
  Var<double> loss = build(tape, leaves);
  if (loss.value().size() != 1) throw ContractError("grad_check: loss must be scalar");
  return loss.value()[0];
}

}  // namespace

GradCheckReport grad_check(std::string unit, std::vector<Tensor<double>> inputs, std::span<Parameter<double>* const> params,
                           const LossBuilder& build, const GradCheckOptions& opts) {
  GradCheckReport report;
  report.unit = std::move(unit);

  for (Parameter<double>* p : params) {
    p->grad = Tensor<double>(p->value.shape(), 0.0);
  }
  std::vector<Tensor<double>> analytic_inputs;
  {
    Tape<double> tape;
    std::vector<Var<double>> leaves;
    for (const auto& t : inputs) leaves.push_back(tape.input(t, true));
    Var<double> loss = build(tape, leaves);
    tape.backward(loss);
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      const Tensor<double>* g = leaves[i].grad();
      analytic_inputs.push_back(g ? *g : Tensor<double>(inputs[i].shape(), 0.0));
    }
  }

  const double h = opts.step;
  auto probe = [&](double& slot, double analytic, const std::string& where) {
    const double saved = slot;
    slot = saved + h;
    const double up = evaluate(inputs, build);
    slot = saved - h;
    const double down = evaluate(inputs, build);
    slot = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double err = relative_error(analytic, numeric, opts.denom_floor);
    ++report.values_checked;
    if (err > report.max_rel_error || report.worst_at.empty()) {
      report.max_rel_error = std::max(err, report.max_rel_error);
      report.worst_at = where;
    }
  };

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      probe(inputs[i][j], analytic_inputs[i][j], "input[" + std::to_string(i) + "][" + std::to_string(j) + "]");
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Tensor<double> analytic = params[k]->grad;
    for (std::size_t j = 0; j < params[k]->value.size(); ++j) {
      probe(params[k]->value[j], analytic[j], "param[" + std::to_string(k) + "][" + std::to_string(j) + "]");
    }
  }
  report.passed = report.max_rel_error < opts.tolerance;
  return report;
}

}  // namespace avf
