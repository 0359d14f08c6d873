// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include <ostream>

#include "CLI11.hpp"
#include "avf/cli/commands.hpp"
#include "avf/errors.hpp"

namespace avf::cli {

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "JSON config with flat dotted keys");
  sub->add_option("--seed", f.seed, "Seed for every random draw of the run");
  sub->add_option("--out", f.out, "Output directory");
  sub->add_option("--set", f.sets, "Override a config key: key=value (repeatable)");
}

RunConfig build_config(const CommonFlags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig() : RunConfig::from_file(f.config);
  for (const auto& s : f.sets) cfg.assign(s);
  if (f.seed) cfg.set("seed", *f.seed);
  if (!f.out.empty()) cfg.set("out", f.out);
  return cfg;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"avf: audio-visual fusion experiments and annotation metrics"};
  app.require_subcommand(1);
  CommonFlags f;
  std::string axis, values, input;
  bool simulate = false, inject_fault = false;

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset (manifest + media)");
  auto* train = app.add_subcommand("train", "Train and write a checkpoint and per-epoch log");
  auto* eval = app.add_subcommand("eval", "Score a checkpoint; metrics, confusion and embeddings");
  auto* ablate = app.add_subcommand("ablate", "One training run per axis value; CSV table");
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient suite (64-bit)");
  auto* annot = app.add_subcommand("annotation-metrics", "S_a, S_r, kappa and personnel adjustment");
  for (auto* sub : {synth, train, eval, ablate, grad, annot}) add_common(sub, f);
  ablate->add_option("--axis", axis, "layers, mask, fusion or gamma");
  ablate->add_option("--values", values, "Comma-separated axis values");
  annot->add_option("--input", input, "Annotation records, JSON lines");
  annot->add_flag("--simulate", simulate, "Run the planted-population adjustment");
  grad->add_flag("--inject-fault", inject_fault, "Add a unit with a wrong backward rule");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    RunConfig cfg = build_config(f);
    if (!axis.empty()) cfg.set("ablate.axis", axis);
    if (!values.empty()) cfg.set("ablate.values", values);
    if (!input.empty()) cfg.set("annotation.input", input);
    if (simulate) cfg.set("annotation.simulate", true);
    if (inject_fault) cfg.set("gradcheck.inject_fault", true);
    const std::filesystem::path dir = cfg.get<std::string>("out");

    if (synth->parsed()) {
      cmd_synth(cfg, dir, out);
    } else if (train->parsed()) {
      cmd_train(cfg, dir, out);
    } else if (eval->parsed()) {
      cmd_eval(cfg, dir, out);
    } else if (ablate->parsed()) {
      cmd_ablate(cfg, dir, out);
    } else if (grad->parsed()) {
      const auto reports = cmd_gradcheck(cfg, dir, out);
      bool ok = true;
      for (const auto& r : reports) {
        if (!r.passed) {
          err << "gradcheck failed: " << r.unit << " (max rel err " << r.max_rel_error << " at " << r.worst_at << ")\n";
          ok = false;
        }
      }
      return ok ? 0 : 2;
    } else if (annot->parsed()) {
      cmd_annotation_metrics(cfg, dir, out);
    }
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace avf::cli
