// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "avf/cli/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

#include "avf/annotation.hpp"
#include "avf/checkpoint.hpp"
#include "avf/errors.hpp"
#include "avf/gradient_suite.hpp"

namespace avf::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw FileError("cannot write " + path.string());
  f << std::setprecision(17);
  return f;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FileError("cannot create " + dir.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const json& j) {
  auto f = open_out(path);
  f << j.dump(2) << '\n';
  if (!f) throw FileError("write failed: " + path.string());
}

std::vector<Sample> load_samples(const RunConfig& cfg) {
  const std::string dir = cfg.get<std::string>("data.dir");
  if (!dir.empty()) return load_manifest(dir);
  return synth_dataset(cfg.synth());
}

std::vector<PreparedSample> pick(const std::vector<PreparedSample>& all, const std::vector<std::size_t>& idx) {
  std::vector<PreparedSample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(all[i]);
  return out;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

std::vector<std::size_t> part(const DatasetSplit& split, const std::string& which, std::size_t n) {
  if (which == "train") return split.train;
  if (which == "test") return split.test;
  return all_indices(n);
}

json log_line(const EpochLog& l) {
  return {{"event", "epoch"}, {"epoch", l.epoch}, {"loss", l.loss},     {"acc", l.acc},
          {"wa_f1", l.wa_f1}, {"uar", l.uar},     {"steps", l.optimizer_steps}};
}

struct Prepared {
  std::vector<Sample> samples;
  std::vector<PreparedSample> data;
  DatasetSplit split;
};

Prepared prepare(const RunConfig& cfg) {
  cfg.validate();
  Prepared p;
  p.samples = load_samples(cfg);
  for (const Sample& s : p.samples) {
    if (s.label >= cfg.get<std::size_t>("data.num_classes")) {
      throw InputError("sample '" + s.id + "' has label " + std::to_string(s.label) + " outside data.num_classes");
    }
  }
  p.split = split_dataset(p.samples, cfg.get<double>("data.train_fraction"), cfg.seed());
  p.data = prepare_samples(p.samples, cfg.model());
  return p;
}

std::unique_ptr<AvCaNet<float>> train_model(const RunConfig& cfg, const std::vector<PreparedSample>& train_set,
                                            TrainResult& result, std::ostream& log, std::ostream* history) {
  auto model = std::make_unique<AvCaNet<float>>(cfg.model(), cfg.seed());
  result = train_loop(*model, train_set, cfg.train(), [&](const EpochLog& l) {
    const std::string line = log_line(l).dump();
    log << line << '\n';
    if (history) *history << line << '\n';
  });
  return model;
}

json metrics_json(const MetricsReport& m) {
  return {{"acc", m.acc},
          {"wa_f1", m.wa_f1},
          {"uar", m.uar},
          {"support", m.support},
          {"per_class_accuracy", m.per_class_accuracy},
          {"per_class_f1", m.per_class_f1},
          {"confusion", m.confusion}};
}

}  // namespace

fs::path cmd_synth(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const SynthConfig sc = cfg.synth();
  sc.validate();
  ensure_dir(out);
  WriteOptions opts;
  opts.inline_synth = cfg.get<bool>("data.inline");
  const fs::path manifest = write_synth_dataset(out, sc, opts);
  log << json{{"event", "synth"},
              {"dir", out.string()},
              {"samples", sc.size()},
              {"checksum", hex(directory_checksum(out))}}
             .dump()
      << '\n';
  return manifest;
}

TrainArtifacts cmd_train(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const Prepared p = prepare(cfg);
  ensure_dir(out);
  const auto idx = cfg.get<std::string>("train.on") == "all" ? all_indices(p.data.size()) : p.split.train;
  if (idx.empty()) throw ConfigError("the training split is empty");
  TrainArtifacts art;
  art.split = p.split;
  auto history = open_out(out / "train_log.jsonl");
  auto model = train_model(cfg, pick(p.data, idx), art.result, log, &history);
  art.checkpoint = out / "checkpoint.bin";
  save_checkpoint(art.checkpoint, model->parameters());
  std::vector<std::string> train_ids, test_ids;
  for (std::size_t i : p.split.train) train_ids.push_back(p.samples[i].id);
  for (std::size_t i : p.split.test) test_ids.push_back(p.samples[i].id);
  write_json(out / "split.json", {{"train", train_ids}, {"test", test_ids}, {"checksum", hex(p.split.checksum)}});
  write_json(out / "config.json", cfg.to_json());
  log << json{{"event", "trained"},
              {"epochs", art.result.history.size()},
              {"final_loss", art.result.final_loss},
              {"train_acc", art.result.history.back().acc},
              {"checkpoint", art.checkpoint.string()},
              {"split_checksum", hex(p.split.checksum)}}
             .dump()
      << '\n';
  return art;
}

Evaluation cmd_eval(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  fs::path ckpt = cfg.get<std::string>("eval.checkpoint");
  if (ckpt.empty()) ckpt = out / "checkpoint.bin";
  if (!fs::exists(ckpt)) throw FileError("checkpoint not found: " + ckpt.string());
  const Prepared p = prepare(cfg);
  const std::string which = cfg.get<std::string>("eval.split");
  const auto idx = part(p.split, which, p.data.size());
  if (idx.empty()) throw ConfigError("the '" + which + "' split is empty");
  AvCaNet<float> model(cfg.model(), cfg.seed());
  load_checkpoint(ckpt, model.parameters());
  const TrainConfig tc = cfg.train();
  const auto subset = pick(p.data, idx);
  const Evaluation ev = evaluate(model, subset, tc.polarity, tc.branch);
  ensure_dir(out);

  json m = metrics_json(ev.metrics);
  m["loss"] = ev.loss;
  m["split"] = which;
  m["n"] = subset.size();
  m["split_checksum"] = hex(p.split.checksum);
  write_json(out / "metrics.json", m);

  const std::size_t k = ev.metrics.confusion.size();
  auto conf = open_out(out / "confusion.csv");
  conf << "true\\pred";
  for (std::size_t c = 0; c < k; ++c) conf << ",c" << c;
  conf << '\n';
  for (std::size_t r = 0; r < k; ++r) {
    conf << 'c' << r;
    for (std::size_t c = 0; c < k; ++c) conf << ',' << ev.metrics.confusion[r][c];
    conf << '\n';
  }

  auto emb = open_out(out / "embeddings.csv");
  emb << "id,label,pred";
  const std::size_t width = ev.embeddings.empty() ? 0 : ev.embeddings.front().size();
  for (std::size_t i = 0; i < width; ++i) emb << ",e" << i;
  emb << '\n';
  for (std::size_t r = 0; r < subset.size(); ++r) {
    emb << subset[r].id << ',' << subset[r].label << ',' << ev.predictions[r];
    for (double v : ev.embeddings[r]) emb << ',' << v;
    emb << '\n';
  }
  if (!conf || !emb) throw FileError("write failed under " + out.string());
  log << json{{"event", "eval"}, {"split", which}, {"n", subset.size()}, {"acc", ev.metrics.acc},
              {"wa_f1", ev.metrics.wa_f1}, {"uar", ev.metrics.uar}, {"loss", ev.loss}}
             .dump()
      << '\n';
  return ev;
}

std::vector<std::string> default_axis_values(const std::string& axis) {
  if (axis == "layers") return {"1", "2", "3"};
  if (axis == "mask") return {"0", "1", "2", "3"};
  if (axis == "gamma") return {"0.3", "0.4", "0.5", "0.7"};
  if (axis == "fusion") {
    std::vector<std::string> v;
    for (FusionStrategy s : kAllFusionStrategies) v.emplace_back(to_string(s));
    return v;
  }
  throw ConfigError("unknown ablation axis '" + axis + "' (layers, mask, fusion, gamma)");
}

std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const std::string axis = cfg.get<std::string>("ablate.axis");
  auto values = split_list(cfg.get<std::string>("ablate.values"));
  const auto defaults = default_axis_values(axis);  // also rejects unknown axes
  if (values.empty()) values = defaults;

  // Each row's config is built and validated before any training starts.
  std::vector<RunConfig> row_cfgs;
  for (const std::string& v : values) {
    RunConfig c = cfg;
    if (axis == "layers") {
      c.assign("model.layers=" + v);
    } else if (axis == "mask") {
      c.assign("model.window=" + v);
    } else if (axis == "fusion") {
      if (!parse_fusion_strategy(v)) throw ConfigError("unknown fusion strategy '" + v + "'");
      c.set("model.fusion", v);
    } else {
      for (const char* key : {"loss.gamma_pos=", "loss.gamma_neu=", "loss.gamma_neg="}) c.assign(key + v);
    }
    c.validate();
    row_cfgs.push_back(std::move(c));
  }

  const Prepared p = prepare(cfg);
  const auto train_set = pick(p.data, p.split.train);
  const auto test_set = p.split.test.empty() ? train_set : pick(p.data, p.split.test);
  if (train_set.empty()) throw ConfigError("the training split is empty");
  ensure_dir(out);
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const RunConfig& c = row_cfgs[i];
    AblationRow row;
    row.axis = axis;
    row.value = values[i];
    if (axis == "gamma") row.value = values[i] + ":" + values[i] + ":" + values[i];
    if (axis == "fusion") row.value = std::string(to_string(c.model().strategy));
    TrainResult result;
    auto model = train_model(c, train_set, result, log, nullptr);
    const TrainConfig tc = c.train();
    row.test = evaluate(*model, test_set, tc.polarity, tc.branch).metrics;
    row.train_acc = result.history.back().acc;
    row.final_loss = result.final_loss;
    row.epochs = result.history.size();
    row.split_checksum = p.split.checksum;
    log << json{{"event", "ablation_row"}, {"axis", axis}, {"value", row.value}, {"acc", row.test.acc},
                {"wa_f1", row.test.wa_f1}, {"uar", row.test.uar}}
               .dump()
        << '\n';
    rows.push_back(std::move(row));
  }
  auto csv = open_out(out / ("ablation_" + axis + ".csv"));
  csv << "axis,value,acc,wa_f1,uar,train_acc,final_loss,epochs,split_checksum\n";
  for (const auto& r : rows) {
    csv << r.axis << ',' << r.value << ',' << r.test.acc << ',' << r.test.wa_f1 << ',' << r.test.uar << ',' << r.train_acc
        << ',' << r.final_loss << ',' << r.epochs << ',' << hex(r.split_checksum) << '\n';
  }
  if (!csv) throw FileError("write failed under " + out.string());
  return rows;
}

std::vector<GradCheckReport> cmd_gradcheck(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const auto reports = run_gradient_suite(cfg.gradcheck());
  json units = json::array();
  for (const auto& r : reports) {
    json j{{"unit", r.unit}, {"max_rel_error", r.max_rel_error}, {"values", r.values_checked},
           {"worst_at", r.worst_at}, {"passed", r.passed}};
    log << j.dump() << '\n';
    units.push_back(j);
  }
  ensure_dir(out);
  write_json(out / "gradcheck.json", {{"seed", cfg.seed()}, {"units", units}});
  return reports;
}

json cmd_annotation_metrics(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  using namespace annotation;
  const std::string input = cfg.get<std::string>("annotation.input");
  const bool simulate = cfg.get<bool>("annotation.simulate");
  const std::size_t k = cfg.get<std::size_t>("annotation.num_categories");
  if (k < 2) throw ConfigError("annotation.num_categories must be >= 2");
  if (input.empty() && !simulate) throw ConfigError("annotation.input is required (or set annotation.simulate)");
  json report = json::object();
  if (!input.empty()) {
    const auto records = read_records(input, k);
    const auto groups = group_cross_checks(records, k);
    json per_group = json::array(), per_set = json::array();
    double sa_sum = 0, sr_sum = 0;
    for (const auto& [name, cc] : groups) {
      const double sa = s_a(cc), sr = s_r(cc);
      sa_sum += sa;
      sr_sum += sr;
      per_group.push_back({{"group", name}, {"s_a", sa}, {"s_r", sr}, {"sets", cc.sets.size()}});
      const auto scores = score_sets(cc);
      for (std::size_t i = 0; i < scores.size(); ++i) {
        per_set.push_back({{"group", name},
                           {"set", cc.sets[i].records.front().set},
                           {"category", cc.sets[i].category},
                           {"weight", scores[i].weight},
                           {"m", scores[i].m},
                           {"matches", scores[i].matches},
                           {"consistent", scores[i].consistent},
                           {"more", scores[i].more},
                           {"s_r_term", scores[i].s_r_term}});
      }
    }
    const KappaResult kappa = fleiss_kappa(records, k);
    std::size_t resolved = 0, more = 0;
    for (const auto& r : records) {
      if (resolve_label(r.labels).status == ResolutionStatus::resolved) {
        ++resolved;
      } else {
        ++more;
      }
    }
    const double n_groups = static_cast<double>(groups.size());
    report["records"] = records.size();
    report["s_a"] = sa_sum / n_groups;
    report["s_r"] = sr_sum / n_groups;
    report["kappa"] = kappa.kappa;
    report["kappa_degenerate"] = kappa.degenerate;
    report["groups"] = per_group;
    report["per_set"] = per_set;
    report["resolution"] = {{"stage1_resolved", resolved}, {"more", more}};
  }
  ensure_dir(out);
  if (simulate) {
    // One weak annotator (B1) in an otherwise skilled population.
    PlantedPopulation pop;
    const char* ids[] = {"A1", "A2", "A3", "B1", "B2", "B3", "C1", "C2", "C3"};
    const double skill[] = {0.9, 0.9, 0.9, 0.3, 0.7, 0.7, 0.8, 0.8, 0.8};
    for (std::size_t i = 0; i < 9; ++i) {
      pop.ids.push_back(ids[i]);
      pop.skill.push_back(std::vector<double>(k, skill[i]));
    }
    pop.num_categories = k;
    pop.records_per_set = cfg.get<std::size_t>("annotation.records_per_set");
    pop.seed = cfg.seed();
    if (k != 6) {
      pop.set_categories.clear();
      for (std::size_t c = 0; c < k; ++c) pop.set_categories.push_back(static_cast<int>(c));
    }
    AdjustConfig ac;
    ac.variance_threshold = cfg.get<double>("annotation.variance_threshold");
    ac.max_iters = cfg.get<std::size_t>("annotation.max_iters");
    ac.category_order.clear();
    for (std::size_t c = 0; c < k; ++c) ac.category_order.push_back(static_cast<int>(c));
    const AdjustResult res = adjust_personnel({{"A1", "A2", "A3"}, {"B1", "B2", "B3"}, {"C1", "C2", "C3"}},
                                              [&](std::size_t g, std::span<const std::string> m) { return pop.run(g, m); }, ac);
    auto csv = open_out(out / "trajectory.csv");
    csv << "iteration,mu,sigma2,swaps,category,moved_up,moved_down,reverted\n";
    json traj = json::array();
    for (const auto& t : res.trajectory) {
      csv << t.iteration << ',' << t.mean << ',' << t.variance << ',' << t.swaps << ',' << t.category << ','
          << t.moved_up << ',' << t.moved_down << ',' << (t.reverted ? 1 : 0) << '\n';
      traj.push_back({{"iteration", t.iteration}, {"mu", t.mean}, {"sigma2", t.variance}, {"swaps", t.swaps}});
    }
    if (!csv) throw FileError("write failed under " + out.string());
    report["adjustment"] = {{"converged", res.converged}, {"swaps", res.swaps}, {"allocation", res.allocation},
                            {"trajectory", traj}};
  }
  write_json(out / "annotation_metrics.json", report);
  log << report.dump() << '\n';
  return report;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const FileError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) return 3;
  if (dynamic_cast<const NumericalError*>(&e)) return 2;
  return 1;
}

}  // namespace avf::cli
