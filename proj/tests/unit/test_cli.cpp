// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "avf/annotation.hpp"
#include "avf/cli/commands.hpp"
#include "avf/errors.hpp"
#include "doctest.h"

using namespace avf;
using namespace avf::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "avf");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("avf_cli_" + name);
  fs::remove_all(p);
  return p;
}

// Small enough that a training run takes a fraction of a second.
std::vector<std::string> toy_flags() {
  return {"--set", "data.n_per_class=5", "--set", "data.frames=8",     "--set", "data.height=10",
          "--set", "data.width=10",      "--set", "data.audio_seconds=0.1", "--set", "model.snippets=2",
          "--set", "model.crop=8",       "--set", "model.channels=8",  "--set", "model.heads=2",
          "--set", "model.q=16",         "--set", "train.epochs=3",    "--set", "train.lr=0.002"};
}

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream f(p);
  std::size_t n = 0;
  for (std::string line; std::getline(f, line);) n += !line.empty();
  return n;
}

}  // namespace

TEST_CASE("run config keys and types") {
  RunConfig cfg;
  CHECK(cfg.get<std::size_t>("model.channels") == 32);
  CHECK_THROWS_AS(cfg.set("model.chanels", 8), ConfigError);
  CHECK_THROWS_AS(cfg.set("model.channels", "eight"), ConfigError);
  CHECK_THROWS_AS(cfg.set("model.channels", -1), ConfigError);
  CHECK_THROWS_AS(cfg.set("train.augment", 1), ConfigError);
  cfg.assign("train.lr=0.01");
  CHECK(cfg.get<double>("train.lr") == 0.01);
  cfg.assign("model.fusion=Gated");
  CHECK(cfg.model().strategy == FusionStrategy::gated);
  cfg.assign("model.fusion=nonsense");
  CHECK_THROWS_AS(cfg.model(), ConfigError);
  CHECK_THROWS_AS(cfg.assign("novalue"), ConfigError);
  CHECK(split_list(" 0.3, 0.4 ,,0.5") == std::vector<std::string>{"0.3", "0.4", "0.5"});

  const fs::path dir = scratch("config");
  fs::create_directories(dir);
  std::ofstream(dir / "ok.json") << R"({"seed": 3, "model.layers": 3, "loss.gamma_neg": 0.5})";
  const RunConfig from = RunConfig::from_file(dir / "ok.json");
  CHECK(from.seed() == 3);
  CHECK(from.model().layers == 3);
  CHECK(from.train().polarity.gamma[2] == 0.5);
  std::ofstream(dir / "bad.json") << R"({"model.depth": 3})";
  CHECK_THROWS_AS(RunConfig::from_file(dir / "bad.json"), ConfigError);
  CHECK(invoke({"train", "--config", (dir / "bad.json").string()}).code == 1);
  CHECK(invoke({"train", "--config", (dir / "missing.json").string()}).code == 3);
  fs::remove_all(dir);
}

TEST_CASE("synth is idempotent and validated") {
  const fs::path a = scratch("synth_a"), b = scratch("synth_b");
  const auto flags = toy_flags();
  REQUIRE(invoke(with({"synth", "--out", a.string()}, flags)).code == 0);
  REQUIRE(invoke(with({"synth", "--out", b.string()}, flags)).code == 0);
  REQUIRE(invoke(with({"synth", "--out", a.string()}, flags)).code == 0);
  CHECK(directory_checksum(a) == directory_checksum(b));
  CHECK(count_lines(a / "manifest.jsonl") == 6 * 5);
  const Run bad = invoke({"synth", "--out", a.string(), "--set", "data.n_per_class=0"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("n_per_class") != std::string::npos);
  CHECK(invoke({"synth", "--bogus"}).code == 1);
  CHECK(invoke({}).code == 1);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("train then eval") {
  const fs::path ds = scratch("ds"), run = scratch("run"), run2 = scratch("run2");
  const auto flags = toy_flags();
  REQUIRE(invoke(with({"synth", "--out", ds.string()}, flags)).code == 0);
  const auto data_flags = with(flags, {"--set", "data.dir=" + ds.string()});

  SUBCASE("overfit-style run: eval on all samples reproduces the last logged ACC") {
    const auto all = with(data_flags, {"--set", "train.on=all", "--set", "eval.split=all"});
    REQUIRE(invoke(with({"train", "--out", run.string()}, all)).code == 0);
    const Run ev = invoke(with({"eval", "--out", run.string()}, all));
    REQUIRE(ev.code == 0);
    std::ifstream log(run / "train_log.jsonl");
    json last;
    for (std::string line; std::getline(log, line);) last = json::parse(line);
    const json metrics = json::parse(slurp(run / "metrics.json"));
    CHECK(metrics["acc"].get<double>() == last["acc"].get<double>());
    CHECK(count_lines(run / "embeddings.csv") == 1 + 30);
  }
  SUBCASE("80/20 split is reproducible and sizes the embedding table") {
    REQUIRE(invoke(with({"train", "--out", run.string()}, data_flags)).code == 0);
    REQUIRE(invoke(with({"train", "--out", run2.string()}, data_flags)).code == 0);
    CHECK(slurp(run / "split.json") == slurp(run2 / "split.json"));
    CHECK(slurp(run / "checkpoint.bin") == slurp(run2 / "checkpoint.bin"));
    REQUIRE(invoke(with({"eval", "--out", run.string()}, data_flags)).code == 0);
    const json split = json::parse(slurp(run / "split.json"));
    CHECK(split["test"].size() == 6);
    CHECK(count_lines(run / "embeddings.csv") == 1 + split["test"].size());
    CHECK(count_lines(run / "confusion.csv") == 7);
  }
  SUBCASE("missing checkpoint is an I/O error") {
    CHECK(invoke(with({"eval", "--out", run.string()}, data_flags)).code == 3);
  }
  fs::remove_all(ds);
  fs::remove_all(run);
  fs::remove_all(run2);
}

TEST_CASE("ablate") {
  const fs::path out = scratch("ablate"), single = scratch("ablate_single");
  const auto flags = toy_flags();
  SUBCASE("rows share the split; one row per value") {
    const Run r = invoke(with({"ablate", "--out", out.string(), "--axis", "fusion"}, flags));
    REQUIRE(r.code == 0);
    CHECK(count_lines(out / "ablation_fusion.csv") == 1 + 5);
    RunConfig cfg;
    for (std::size_t i = 0; i + 1 < flags.size(); i += 2) cfg.assign(flags[i + 1]);
    cfg.set("ablate.axis", "gamma");
    std::ostringstream log;
    const auto rows = cmd_ablate(cfg, out, log);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].value == "0.3:0.3:0.3");
    for (const auto& row : rows) CHECK(row.split_checksum == rows[0].split_checksum);
  }
  SUBCASE("a single value equals train + eval") {
    RunConfig cfg;
    for (std::size_t i = 0; i + 1 < flags.size(); i += 2) cfg.assign(flags[i + 1]);
    cfg.set("ablate.axis", "layers");
    cfg.set("ablate.values", "2");
    std::ostringstream log;
    const auto rows = cmd_ablate(cfg, out, log);
    REQUIRE(rows.size() == 1);
    cmd_train(cfg, single, log);
    const Evaluation ev = cmd_eval(cfg, single, log);
    CHECK(rows[0].test.acc == ev.metrics.acc);
    CHECK(rows[0].test.wa_f1 == ev.metrics.wa_f1);
    CHECK(rows[0].test.uar == ev.metrics.uar);
  }
  SUBCASE("bad axes and values") {
    CHECK(invoke(with({"ablate", "--out", out.string(), "--axis", "depth"}, flags)).code == 1);
    CHECK(invoke(with({"ablate", "--out", out.string(), "--axis", "fusion", "--values", "Concat"}, flags)).code == 1);
    CHECK(invoke(with({"ablate", "--out", out.string(), "--axis", "mask", "--values", "-1"}, flags)).code == 1);
  }
  fs::remove_all(out);
  fs::remove_all(single);
}

TEST_CASE("gradcheck command") {
  const fs::path out = scratch("grad");
  const std::vector<std::string> small{"--set", "gradcheck.snippets=3", "--set", "gradcheck.channels=4"};
  const Run ok = invoke(with({"gradcheck", "--out", out.string(), "--seed", "4"}, small));
  CHECK(ok.code == 0);
  const std::string first = slurp(out / "gradcheck.json");
  CHECK(invoke(with({"gradcheck", "--out", out.string(), "--seed", "4"}, small)).code == 0);
  CHECK(slurp(out / "gradcheck.json") == first);
  const Run bad = invoke(with({"gradcheck", "--out", out.string(), "--inject-fault"}, small));
  CHECK(bad.code == 2);
  CHECK(bad.err.find("faulty_scale") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("annotation-metrics command") {
  using namespace avf::annotation;
  const fs::path out = scratch("annot");
  fs::create_directories(out);
  std::vector<AnnotationRecord> recs;
  const auto cats = standard_set_categories();
  for (std::size_t s = 0; s < cats.size(); ++s)
    for (int j = 0; j < 100; ++j) {
      AnnotationRecord r;
      r.sample_id = std::to_string(s) + "_" + std::to_string(j);
      r.prior = cats[s];
      r.labels = {cats[s], cats[s], cats[s]};
      r.set = s;
      r.category = cats[s];
      r.group = "GA";
      recs.push_back(r);
    }
  write_records(out / "consistent.jsonl", recs);
  const Run r = invoke({"annotation-metrics", "--out", out.string(), "--input", (out / "consistent.jsonl").string()});
  REQUIRE(r.code == 0);
  const json rep = json::parse(slurp(out / "annotation_metrics.json"));
  CHECK(rep["s_a"].get<double>() == 1.0);
  CHECK(rep["s_r"].get<double>() == 70.0);
  CHECK(rep["kappa"].get<double>() == 1.0);

  const Run mixed = invoke({"annotation-metrics", "--out", out.string(), "--input",
                         (fs::path(AVF_TEST_DATA_DIR) / "annotation_mixed.jsonl").string()});
  REQUIRE(mixed.code == 0);
  const json m = json::parse(slurp(out / "annotation_metrics.json"));
  CHECK(std::abs(m["groups"][0]["s_r"].get<double>() - 2101.0 / 360.0) <= 1e-12);
  CHECK(std::abs(m["s_r"].get<double>() - (2101.0 / 360.0 + 425.0 / 72.0) / 2) <= 1e-12);
  CHECK(m["per_set"].size() == 18);

  std::ofstream(out / "empty.jsonl").close();
  CHECK(invoke({"annotation-metrics", "--out", out.string(), "--input", (out / "empty.jsonl").string()}).code == 1);
  std::ofstream(out / "broken.jsonl") << to_json(recs[0]).dump() << "\n{not json\n";
  const Run broken = invoke({"annotation-metrics", "--out", out.string(), "--input", (out / "broken.jsonl").string()});
  CHECK(broken.code == 1);
  CHECK(broken.err.find("broken.jsonl:2") != std::string::npos);
  CHECK(invoke({"annotation-metrics", "--out", out.string(), "--input", (out / "nothere.jsonl").string()}).code == 3);

  const Run sim = invoke({"annotation-metrics", "--out", out.string(), "--simulate", "--seed", "5"});
  REQUIRE(sim.code == 0);
  CHECK(count_lines(out / "trajectory.csv") >= 2);
  fs::remove_all(out);
}

TEST_CASE("exit codes by error kind") {
  CHECK(exit_code_for(ConfigError("x")) == 1);
  CHECK(exit_code_for(InputError("x")) == 1);
  CHECK(exit_code_for(NumericalError("x")) == 2);
  CHECK(exit_code_for(FileError("x")) == 3);
}
