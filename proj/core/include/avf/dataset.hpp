// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "avf/synth.hpp"

namespace avf {

// Media file layout (little endian):
//   u64 header_bytes | JSON header | float32 values
// Video header: {"kind":"video","shape":[frames,H,W,3],"fps":f}
// Audio header: {"kind":"audio","shape":[n],"sample_rate":r}

void write_video(const std::filesystem::path& path, const VideoClip& clip);
VideoClip read_video(const std::filesystem::path& path);
void write_audio(const std::filesystem::path& path, const AudioTrack& track);
AudioTrack read_audio(const std::filesystem::path& path);

/// Manifest lines look like
///   {"id":"c0_0000","label":0,"video":{"path":"media/c0_0000.video"},"audio":{"path":"..."}}
/// or, for inline synthetic specs,
///   {"id":...,"label":0,"video":{"synth":{<SynthConfig>,"index":i}},"audio":{"synth":{...}}}
/// Relative paths resolve against the manifest's directory.
struct WriteOptions {
  bool inline_synth = false;  // write specs instead of media files
};

/// Writes `<dir>/manifest.jsonl` (+ media/ files). Returns the manifest path.
std::filesystem::path write_synth_dataset(const std::filesystem::path& dir, const SynthConfig& cfg,
                                          const WriteOptions& opts = {});

/// Loads every sample of a manifest (a file, or a directory holding manifest.jsonl).
std::vector<Sample> load_manifest(const std::filesystem::path& path);

/// FNV-1a, 64-bit.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

struct DatasetSplit {
  std::vector<std::size_t> train, test;  // indices into the sample list, ascending
  std::uint64_t checksum = 0;            // fnv1a over the ids of each part
};

/// Stratified seeded split: within every class, a seeded shuffle sends
/// round(train_fraction * count) samples to train and the rest to test.
DatasetSplit split_dataset(const std::vector<Sample>& samples, double train_fraction, std::uint64_t seed);

/// Checksum of every file under `dir` (relative path + bytes), sorted by path.
std::uint64_t directory_checksum(const std::filesystem::path& dir);

}  // namespace avf
