// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "avf/dataset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "avf/errors.hpp"

namespace avf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_media(const fs::path& path, const json& header, std::span<const float> values) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FileError("cannot write " + path.string());
  const std::string h = header.dump();
  std::array<char, 8> len{};
  for (std::size_t i = 0; i < 8; ++i) len[i] = static_cast<char>((static_cast<std::uint64_t>(h.size()) >> (8 * i)) & 0xFF);
  os.write(len.data(), 8);
  os.write(h.data(), static_cast<std::streamsize>(h.size()));
  std::vector<char> buf(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (std::size_t b = 0; b < 4; ++b) buf[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw FileError("failed writing " + path.string());
}

std::pair<json, std::vector<float>> read_media(const fs::path& path, std::string_view kind) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FileError("cannot open " + path.string());
  std::array<unsigned char, 8> len{};
  is.read(reinterpret_cast<char*>(len.data()), 8);
  if (!is) throw FileError("truncated media file " + path.string());
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < 8; ++i) n |= static_cast<std::uint64_t>(len[i]) << (8 * i);
  if (n > (1u << 20)) throw FileError("implausible header length in " + path.string());
  std::string h(n, '\0');
  is.read(h.data(), static_cast<std::streamsize>(n));
  if (!is) throw FileError("truncated media header in " + path.string());
  json header;
  try {
    header = json::parse(h);
  } catch (const json::exception& e) {
    throw FileError("bad media header in " + path.string() + ": " + e.what());
  }
  if (header.value("kind", "") != kind) throw FileError(path.string() + " is not a " + std::string(kind) + " file");
  std::size_t count = 1;
  for (std::size_t d : header.at("shape").get<std::vector<std::size_t>>()) count *= d;
  std::vector<unsigned char> raw(count * 4);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!is) throw FileError("truncated media data in " + path.string());
  std::vector<float> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (std::size_t b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(raw[i * 4 + b]) << (8 * b);
    values[i] = std::bit_cast<float>(bits);
  }
  return {std::move(header), std::move(values)};
}

}  // namespace

void write_video(const fs::path& path, const VideoClip& clip) {
  write_media(path, {{"kind", "video"}, {"shape", clip.frames.shape()}, {"fps", clip.fps}}, clip.frames.data());
}

VideoClip read_video(const fs::path& path) {
  auto [header, values] = read_media(path, "video");
  VideoClip clip;
  clip.fps = header.value("fps", 8.0);
  try {
    clip.frames = Tensor<float>(header.at("shape").get<Shape>(), std::move(values));
  } catch (const DimensionError& e) {
    throw FileError("bad video shape in " + path.string() + ": " + e.what());
  }
  if (clip.frames.rank() != 4 || clip.frames.dim(3) != 3) throw FileError("video in " + path.string() + " is not [frames x H x W x 3]");
  return clip;
}

void write_audio(const fs::path& path, const AudioTrack& track) {
  write_media(path, {{"kind", "audio"}, {"shape", {track.samples.size()}}, {"sample_rate", track.sample_rate}}, track.samples);
}

AudioTrack read_audio(const fs::path& path) {
  auto [header, values] = read_media(path, "audio");
  AudioTrack t;
  t.sample_rate = header.value("sample_rate", 44100.0);
  t.samples = std::move(values);
  return t;
}

fs::path write_synth_dataset(const fs::path& dir, const SynthConfig& cfg, const WriteOptions& opts) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(dir / "media", ec);
  if (ec) throw FileError("cannot create " + (dir / "media").string() + ": " + ec.message());
  const fs::path manifest = dir / "manifest.jsonl";
  std::ofstream os(manifest, std::ios::trunc);
  if (!os) throw FileError("cannot write " + manifest.string());
  for (std::size_t i = 0; i < cfg.size(); ++i) {
    json line;
    if (opts.inline_synth) {
      json spec = cfg;
      spec["index"] = i;
      const Sample s{synth_sample(cfg, i)};
      line = {{"id", s.id}, {"label", s.label}, {"video", {{"synth", spec}}}, {"audio", {{"synth", spec}}}};
    } else {
      const Sample s = synth_sample(cfg, i);
      const std::string v = "media/" + s.id + ".video", a = "media/" + s.id + ".audio";
      write_video(dir / v, s.video);
      write_audio(dir / a, s.audio);
      line = {{"id", s.id}, {"label", s.label}, {"video", {{"path", v}}}, {"audio", {{"path", a}}}};
    }
    os << line.dump() << '\n';
  }
  if (!os) throw FileError("failed writing " + manifest.string());
  return manifest;
}

std::vector<Sample> load_manifest(const fs::path& path) {
  const fs::path manifest = fs::is_directory(path) ? path / "manifest.jsonl" : path;
  std::ifstream is(manifest);
  if (!is) throw FileError("cannot open manifest " + manifest.string());
  const fs::path base = manifest.parent_path();
  std::vector<Sample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = manifest.string() + ":" + std::to_string(lineno);
    try {
      const json j = json::parse(line);
      Sample s;
      s.id = j.at("id").get<std::string>();
      s.label = j.at("label").get<std::size_t>();
      const json& v = j.at("video");
      const json& a = j.at("audio");
      if (v.contains("synth")) {
        s.video = synth_sample(v["synth"].get<SynthConfig>(), v["synth"].at("index").get<std::size_t>()).video;
      } else {
        s.video = read_video(base / v.at("path").get<std::string>());
      }
      if (a.contains("synth")) {
        s.audio = synth_sample(a["synth"].get<SynthConfig>(), a["synth"].at("index").get<std::size_t>()).audio;
      } else {
        s.audio = read_audio(base / a.at("path").get<std::string>());
      }
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw InputError(where + ": " + e.what());
    } catch (const FileError&) {
      throw;
    } catch (const Error& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  if (out.empty()) throw InputError("manifest " + manifest.string() + " has no samples");
  return out;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

DatasetSplit split_dataset(const std::vector<Sample>& samples, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0 && train_fraction <= 1)) throw ConfigError("train fraction must lie in (0, 1]");
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < samples.size(); ++i) by_class[samples[i].label].push_back(i);
  DatasetSplit split;
  for (auto& [label, idx] : by_class) {
    Rng rng(derive_seed(seed, label, 0x5117));
    rng.shuffle(idx);
    const auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(idx.size())));
    split.train.insert(split.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.insert(split.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  std::uint64_t h = fnv1a("train");
  for (std::size_t i : split.train) h = fnv1a(samples[i].id + "\n", h);
  h = fnv1a("test", h);
  for (std::size_t i : split.test) h = fnv1a(samples[i].id + "\n", h);
  split.checksum = h;
  return split;
}

std::uint64_t directory_checksum(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::uint64_t h = fnv1a("");
  for (const auto& f : files) {
    h = fnv1a(fs::relative(f, dir).generic_string(), h);
    std::ifstream is(f, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    h = fnv1a(ss.str(), h);
  }
  return h;
}

}  // namespace avf
