// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "avf/cli/run_config.hpp"
#include "avf/dataset.hpp"
#include "avf/gradcheck.hpp"
#include "avf/train.hpp"

namespace avf::cli {

// Commands write their artifacts under `out` and JSON-lines progress to
// `log`. Errors are thrown (see exit_code_for).

/// Writes the synthetic dataset; returns the manifest path.
std::filesystem::path cmd_synth(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);

struct TrainArtifacts {
  TrainResult result;
  DatasetSplit split;
  std::filesystem::path checkpoint;
};

/// Trains on the configured split; writes checkpoint.bin, train_log.jsonl,
/// split.json and config.json.
TrainArtifacts cmd_train(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);

/// Scores a checkpoint; writes metrics.json, confusion.csv, embeddings.csv.
Evaluation cmd_eval(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);

struct AblationRow {
  std::string axis, value;
  MetricsReport test;
  double train_acc = 0;
  double final_loss = 0;
  std::size_t epochs = 0;
  std::uint64_t split_checksum = 0;
};

/// Axis values default to: layers 1,2,3; mask 0,1,2,3; fusion all five;
/// gamma 0.3,0.4,0.5,0.7. Writes ablation_<axis>.csv.
std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
std::vector<std::string> default_axis_values(const std::string& axis);

/// Runs the finite-difference suite; writes gradcheck.json.
std::vector<GradCheckReport> cmd_gradcheck(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);

/// S_a, S_r, kappa and vote summary over annotation.input; with
/// annotation.simulate, also the planted-population adjustment and
/// trajectory.csv. Writes annotation_metrics.json.
nlohmann::json cmd_annotation_metrics(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);

/// 1 config/validation, 2 numerical, 3 I/O.
int exit_code_for(const std::exception& e);

/// Full command line: parses, runs, maps errors to exit codes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace avf::cli
