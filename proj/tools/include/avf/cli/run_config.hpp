// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "avf/gradient_suite.hpp"
#include "avf/model.hpp"
#include "avf/synth.hpp"
#include "avf/train.hpp"

namespace avf::cli {

/// Flat dotted-key configuration ("model.channels": 32). Every key has a
/// default and a type; unknown keys and wrong types are ConfigErrors.
class RunConfig {
 public:
  RunConfig();

  /// Defaults overlaid with a JSON object file.
  static RunConfig from_file(const std::filesystem::path& path);

  void set(const std::string& key, const nlohmann::json& value);
  /// "key=value"; the value is read as JSON when it parses, else as a string.
  void assign(const std::string& assignment);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const nlohmann::json& at(const std::string& key) const;
  template <typename T>
  T get(const std::string& key) const {
    return at(key).get<T>();
  }

  nlohmann::json to_json() const;

  std::uint64_t seed() const { return get<std::uint64_t>("seed"); }
  SynthConfig synth() const;
  ModelConfig model() const;
  TrainConfig train() const;
  GradientSuiteConfig gradcheck() const;
  /// Validates every derived struct; throws ConfigError.
  void validate() const;

 private:
  std::map<std::string, nlohmann::json> values_;
};

/// Comma-separated list, surrounding blanks trimmed, empty items dropped.
std::vector<std::string> split_list(const std::string& s);

}  // namespace avf::cli
