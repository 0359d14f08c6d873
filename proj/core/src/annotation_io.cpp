// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "avf/annotation.hpp"
#include "avf/errors.hpp"
#include "avf/losses.hpp"

namespace avf::annotation {

namespace {

std::string lower(std::string_view s) {
  std::string out;
  for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

// Category id from an integer or, for the six-emotion taxonomy, a name.
int parse_label(const nlohmann::json& v, std::size_t k, bool allow_more, const char* field) {
  if (v.is_number_integer()) {
    const auto id = v.get<long long>();
    if (id < 0 || static_cast<std::size_t>(id) >= k) {
      throw InputError(std::string(field) + ": category " + std::to_string(id) + " outside [0, " + std::to_string(k) + ")");
    }
    return static_cast<int>(id);
  }
  if (v.is_string()) {
    const std::string s = lower(v.get<std::string>());
    if (allow_more && s == "more") return kMore;
    if (k == 6) {
      const auto& names = PolarityMap::six_emotion_names();
      for (std::size_t i = 0; i < names.size(); ++i)
        if (lower(names[i]) == s) return static_cast<int>(i);
    }
    throw InputError(std::string(field) + ": unknown category '" + v.get<std::string>() + "'");
  }
  throw InputError(std::string(field) + ": expected a category id or name");
}

}  // namespace

AnnotationRecord record_from_json(const nlohmann::json& j, std::size_t k) {
  if (!j.is_object()) throw InputError("record must be a JSON object");
  static const char* const known[] = {"sample", "prior", "labels", "annotators", "confidence", "group", "set", "category"};
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* s) { return key == s; }) == std::end(known)) {
      throw InputError("unknown field '" + key + "'");
    }
  }
  for (const char* required : {"sample", "prior", "labels", "set", "category"}) {
    if (!j.contains(required)) throw InputError(std::string("missing field '") + required + "'");
  }
  AnnotationRecord r;
  r.sample_id = j.at("sample").get<std::string>();
  r.prior = parse_label(j.at("prior"), k, true, "prior");
  if (!j.at("labels").is_array() || j.at("labels").size() != 3) throw InputError("labels: expected 3 member labels");
  for (const auto& l : j.at("labels")) r.labels.push_back(parse_label(l, k, false, "labels"));
  if (j.contains("annotators")) {
    r.annotators = j.at("annotators").get<std::vector<std::string>>();
    if (r.annotators.size() != 3) throw InputError("annotators: expected 3 ids");
  }
  if (j.contains("confidence")) {
    const double c = j.at("confidence").get<double>();
    if (!(c >= 0 && c <= 1)) throw InputError("confidence must lie in [0, 1]");
    r.confidence = c;
  }
  r.group = j.value("group", std::string("default"));
  const auto set = j.at("set").get<long long>();
  if (set < 0) throw InputError("set must be >= 0");
  r.set = static_cast<std::size_t>(set);
  r.category = parse_label(j.at("category"), k, false, "category");
  return r;
}

nlohmann::json to_json(const AnnotationRecord& r) {
  nlohmann::json j;
  j["sample"] = r.sample_id;
  j["prior"] = r.prior == kMore ? nlohmann::json("MORE") : nlohmann::json(r.prior);
  j["labels"] = r.labels;
  if (!r.annotators.empty()) j["annotators"] = r.annotators;
  if (r.confidence) j["confidence"] = *r.confidence;
  j["group"] = r.group;
  j["set"] = r.set;
  j["category"] = r.category;
  return j;
}

std::vector<AnnotationRecord> read_records(const std::filesystem::path& path, std::size_t k) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open " + path.string());
  std::vector<AnnotationRecord> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line), k));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path.filename().string() + ":" + std::to_string(n) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError(path.filename().string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  if (out.empty()) throw InputError(path.filename().string() + ": no annotation records");
  return out;
}

void write_records(const std::filesystem::path& path, std::span<const AnnotationRecord> records) {
  std::ofstream out(path);
  if (!out) throw FileError("cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) throw FileError("write failed: " + path.string());
}

std::vector<std::pair<std::string, CrossCheck>> group_cross_checks(std::span<const AnnotationRecord> records,
                                                                   std::size_t k) {
  std::vector<std::pair<std::string, CrossCheck>> groups;
  std::map<std::string, std::size_t> group_at;
  std::map<std::pair<std::string, std::size_t>, std::size_t> set_at;
  for (const auto& r : records) {
    auto [git, new_group] = group_at.try_emplace(r.group, groups.size());
    if (new_group) {
      groups.emplace_back(r.group, CrossCheck{});
      groups.back().second.num_categories = k;
    }
    CrossCheck& cc = groups[git->second].second;
    auto [sit, new_set] = set_at.try_emplace({r.group, r.set}, cc.sets.size());
    if (new_set) {
      cc.sets.push_back(CheckSet{r.category, 1.0, {}});
    } else if (cc.sets[sit->second].category != r.category) {
      throw InputError("record '" + r.sample_id + "': set " + std::to_string(r.set) + " of group '" + r.group +
                       "' mixes categories");
    }
    cc.sets[sit->second].records.push_back(r);
  }
  for (auto& [_, cc] : groups) assign_weights(cc);
  return groups;
}

}  // namespace avf::annotation
