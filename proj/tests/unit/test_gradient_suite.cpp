// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <chrono>

#include "avf/errors.hpp"
#include "avf/gradient_suite.hpp"
#include "doctest.h"

using namespace avf;

TEST_CASE("gradient suite passes at desk dims") {
  const auto t0 = std::chrono::steady_clock::now();
  const auto reports = run_gradient_suite({});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  MESSAGE("gradient suite: " << reports.size() << " units in " << secs << " s");
  CHECK(secs < 120.0);
  for (const auto& r : reports) {
    INFO(r.unit << " max rel err " << r.max_rel_error << " at " << r.worst_at);
    CHECK(r.passed);
    CHECK(r.values_checked > 0);
  }
  for (const char* unit : {"sa_block", "cma_block", "gated_parallel_fusion", "dilated_residual_block", "lisf",
                           "glcf_MidConcat", "ep_ce_multitask_loss", "masked_softmax", "conv2d"}) {
    CHECK(std::any_of(reports.begin(), reports.end(), [&](const auto& r) { return r.unit == unit; }));
  }
}

TEST_CASE("gradient suite is deterministic per seed and flags a faulty rule") {
  GradientSuiteConfig cfg;
  cfg.seed = 9;
  cfg.snippets = 3;
  cfg.channels = 4;
  cfg.inject_fault = true;
  const auto a = run_gradient_suite(cfg);
  const auto b = run_gradient_suite(cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].unit == b[i].unit);
    CHECK(a[i].max_rel_error == b[i].max_rel_error);
  }
  CHECK(a.back().unit == "faulty_scale");
  CHECK_FALSE(a.back().passed);
  for (std::size_t i = 0; i + 1 < a.size(); ++i) CHECK(a[i].passed);

  cfg.heads = 3;
  CHECK_THROWS_AS(run_gradient_suite(cfg), ConfigError);
}
