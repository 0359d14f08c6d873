// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "avf/cli/run_config.hpp"

#include <fstream>

#include "avf/errors.hpp"

namespace avf::cli {

namespace {

using json = nlohmann::json;

const std::map<std::string, json>& defaults() {
  static const std::map<std::string, json> d = [] {
    const SynthConfig sc;
    const ModelConfig mc;
    const TrainConfig tc;
    const GradientSuiteConfig gc;
    std::map<std::string, json> m;
    m["seed"] = 7;
    m["out"] = "avf_out";

    m["data.dir"] = "";  // empty: synthesize in memory from data.*
    m["data.n_per_class"] = sc.n_per_class;
    m["data.num_classes"] = sc.num_classes;
    m["data.frames"] = sc.frames;
    m["data.height"] = sc.height;
    m["data.width"] = sc.width;
    m["data.fps"] = sc.fps;
    m["data.sample_rate"] = sc.sample_rate;
    m["data.audio_seconds"] = sc.audio_seconds;
    m["data.signal_strength"] = sc.signal_strength;
    m["data.video_noise"] = sc.video_noise;
    m["data.audio_noise"] = sc.audio_noise;
    m["data.inline"] = false;
    m["data.train_fraction"] = 0.8;

    m["model.snippets"] = mc.snippets;
    m["model.frames_per_snippet"] = mc.frames_per_snippet;
    m["model.crop"] = mc.crop;
    m["model.channels"] = mc.channels;
    m["model.layers"] = mc.layers;
    m["model.window"] = mc.window;
    m["model.heads"] = mc.heads;
    m["model.q"] = mc.q;
    m["model.shared_layer_projection"] = mc.shared_layer_projection;
    m["model.fusion"] = std::string(to_string(mc.strategy));

    m["train.lr"] = tc.optim.lr;
    m["train.weight_decay"] = tc.optim.weight_decay;
    m["train.epochs"] = tc.epochs;
    m["train.batch_size"] = tc.batch_size;
    m["train.accumulation_steps"] = tc.accumulation_steps;
    m["train.stop_at_train_acc"] = tc.stop_at_train_acc;
    m["train.augment"] = tc.augment;
    m["train.on"] = "train";  // "train" split or "all" samples

    m["loss.gamma_pos"] = 0.7;
    m["loss.gamma_neu"] = 0.7;
    m["loss.gamma_neg"] = 0.7;
    m["loss.weight_fused"] = 1.0;
    m["loss.weight_visual"] = 1.0;
    m["loss.weight_audio"] = 1.0;

    m["eval.checkpoint"] = "";  // default: <out>/checkpoint.bin
    m["eval.split"] = "test";   // "test", "train" or "all"

    m["ablate.axis"] = "";
    m["ablate.values"] = "";  // comma-separated; empty: the axis' default grid

    m["gradcheck.snippets"] = gc.snippets;
    m["gradcheck.channels"] = gc.channels;
    m["gradcheck.heads"] = gc.heads;
    m["gradcheck.layers"] = gc.layers;
    m["gradcheck.window"] = gc.window;
    m["gradcheck.inject_fault"] = false;

    m["annotation.input"] = "";
    m["annotation.num_categories"] = 6;
    m["annotation.simulate"] = false;
    m["annotation.variance_threshold"] = 1.0;
    m["annotation.max_iters"] = 12;
    m["annotation.records_per_set"] = 100;
    return m;
  }();
  return d;
}

bool same_kind(const json& def, const json& v) {
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_string()) return v.is_string();
  if (def.is_number_unsigned() || def.is_number_integer()) return v.is_number_integer() && v.get<long long>() >= 0;
  if (def.is_number_float()) return v.is_number();
  return false;
}

const char* kind_name(const json& def) {
  if (def.is_boolean()) return "a boolean";
  if (def.is_string()) return "a string";
  if (def.is_number_float()) return "a number";
  return "a non-negative integer";
}

}  // namespace

RunConfig::RunConfig() : values_(defaults()) {}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path.string() + ": config must be a JSON object");
  RunConfig cfg;
  for (const auto& [k, v] : j.items()) cfg.set(k, v);
  return cfg;
}

void RunConfig::set(const std::string& key, const json& value) {
  const auto it = defaults().find(key);
  if (it == defaults().end()) throw ConfigError("unknown config key '" + key + "'");
  if (!same_kind(it->second, value)) {
    throw ConfigError("config key '" + key + "' must be " + kind_name(it->second) + ", got " + value.dump());
  }
  values_[key] = value;
}

void RunConfig::assign(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  const auto it = defaults().find(key);
  if (it != defaults().end() && it->second.is_string()) {
    set(key, text);
    return;
  }
  json v = json::parse(text, nullptr, false);
  set(key, v.is_discarded() ? json(text) : v);
}

const json& RunConfig::at(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

json RunConfig::to_json() const {
  json j = json::object();
  for (const auto& [k, v] : values_) j[k] = v;
  return j;
}

SynthConfig RunConfig::synth() const {
  SynthConfig c;
  c.n_per_class = get<std::size_t>("data.n_per_class");
  c.num_classes = get<std::size_t>("data.num_classes");
  c.seed = seed();
  c.frames = get<std::size_t>("data.frames");
  c.height = get<std::size_t>("data.height");
  c.width = get<std::size_t>("data.width");
  c.fps = get<double>("data.fps");
  c.sample_rate = get<double>("data.sample_rate");
  c.audio_seconds = get<double>("data.audio_seconds");
  c.signal_strength = get<double>("data.signal_strength");
  c.video_noise = get<double>("data.video_noise");
  c.audio_noise = get<double>("data.audio_noise");
  return c;
}

ModelConfig RunConfig::model() const {
  ModelConfig m;
  m.snippets = get<std::size_t>("model.snippets");
  m.frames_per_snippet = get<std::size_t>("model.frames_per_snippet");
  m.crop = get<std::size_t>("model.crop");
  m.channels = get<std::size_t>("model.channels");
  m.layers = get<std::size_t>("model.layers");
  m.window = get<std::size_t>("model.window");
  m.heads = get<std::size_t>("model.heads");
  m.num_classes = get<std::size_t>("data.num_classes");
  m.q = get<std::size_t>("model.q");
  m.shared_layer_projection = get<bool>("model.shared_layer_projection");
  const std::string name = get<std::string>("model.fusion");
  const auto s = parse_fusion_strategy(name);
  if (!s) throw ConfigError("unknown fusion strategy '" + name + "'");
  m.strategy = *s;
  return m;
}

TrainConfig RunConfig::train() const {
  TrainConfig t;
  t.optim.lr = get<double>("train.lr");
  t.optim.weight_decay = get<double>("train.weight_decay");
  t.epochs = get<std::size_t>("train.epochs");
  t.batch_size = get<std::size_t>("train.batch_size");
  t.accumulation_steps = get<std::size_t>("train.accumulation_steps");
  t.seed = seed();
  t.stop_at_train_acc = get<double>("train.stop_at_train_acc");
  t.augment = get<bool>("train.augment");
  t.branch = {get<double>("loss.weight_fused"), get<double>("loss.weight_visual"), get<double>("loss.weight_audio")};
  const std::size_t k = get<std::size_t>("data.num_classes");
  if (k == 6) {
    t.polarity = PolarityMap::six_emotions();
  } else {
    // No polarity mapping outside the six-emotion taxonomy: one shared
    // polarity, so EP-CE reduces to CE.
    t.polarity.polarity.assign(k, Polarity::neutral);
  }
  t.polarity.gamma = {get<double>("loss.gamma_pos"), get<double>("loss.gamma_neu"), get<double>("loss.gamma_neg")};
  return t;
}

GradientSuiteConfig RunConfig::gradcheck() const {
  GradientSuiteConfig g;
  g.seed = seed();
  g.snippets = get<std::size_t>("gradcheck.snippets");
  g.channels = get<std::size_t>("gradcheck.channels");
  g.heads = get<std::size_t>("gradcheck.heads");
  g.layers = get<std::size_t>("gradcheck.layers");
  g.window = get<std::size_t>("gradcheck.window");
  g.inject_fault = get<bool>("gradcheck.inject_fault");
  return g;
}

void RunConfig::validate() const {
  synth().validate();
  const ModelConfig m = model();
  m.validate();
  const TrainConfig t = train();
  t.validate();
  t.polarity.validate(m.num_classes);
  const double f = get<double>("data.train_fraction");
  if (!(f > 0 && f <= 1)) throw ConfigError("data.train_fraction must lie in (0, 1]");
  const std::string on = get<std::string>("train.on");
  if (on != "train" && on != "all") throw ConfigError("train.on must be 'train' or 'all'");
  const std::string split = get<std::string>("eval.split");
  if (split != "test" && split != "train" && split != "all") throw ConfigError("eval.split must be 'test', 'train' or 'all'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t end = std::min(s.find(',', start), s.size());
    std::string item = s.substr(start, end - start);
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    start = end + 1;
  }
  return out;
}

}  // namespace avf::cli
