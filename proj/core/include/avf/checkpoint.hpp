// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "avf/parameters.hpp"

namespace avf {

// Weight checkpoint, little-endian binary:
//
//   magic        8 bytes  "AVFCKPT\0"
//   version      u32      1
//   scalar_bytes u32      4 (float32) or 8 (float64)
//   count        u64      number of tensors
//   per tensor:
//     name_len   u32, name bytes (UTF-8, no terminator)
//     rank       u32, dims u64[rank]
//     values     product(dims) IEEE-754 scalars of scalar_bytes each
//
// Values are written bit-for-bit, so a save/load cycle at the stored
// precision reproduces the tensors exactly.

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;  // widened copy; exact for both precisions
};

struct CheckpointData {
  std::uint32_t scalar_bytes = 4;
  std::vector<NamedTensor> tensors;
};

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParameterRegistry<T>& params);

/// Loads values into the registry. Every registry name must be present with a
/// matching shape, and the stored precision must equal sizeof(T).
template <typename T>
void load_checkpoint(const std::filesystem::path& path, const ParameterRegistry<T>& params);

CheckpointData read_checkpoint(const std::filesystem::path& path);

}  // namespace avf
