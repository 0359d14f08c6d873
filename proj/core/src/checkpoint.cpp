// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "avf/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace avf {

namespace {

constexpr std::array<char, 8> kMagic = {'A', 'V', 'F', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename U>
void put_le(std::ostream& os, U v) {
  static_assert(std::is_unsigned_v<U>);
  std::array<char, sizeof(U)> b{};
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  os.write(b.data(), b.size());
}

template <typename U>
U get_le(std::istream& is, const std::filesystem::path& path) {
  std::array<unsigned char, sizeof(U)> b{};
  is.read(reinterpret_cast<char*>(b.data()), b.size());
  if (!is) throw FileError("truncated checkpoint " + path.string());
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParameterRegistry<T>& params) {
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FileError("cannot write checkpoint " + path.string());
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, kVersion);
  put_le<std::uint32_t>(os, sizeof(T));
  put_le<std::uint64_t>(os, params.count());
  for (const auto& e : params.entries()) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    const Shape& s = e.param->value.shape();
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    for (std::size_t d : s) put_le<std::uint64_t>(os, d);
    for (T v : e.param->value.data()) put_le<Bits>(os, std::bit_cast<Bits>(v));
  }
  if (!os) throw FileError("failed writing checkpoint " + path.string());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FileError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw FileError("not a checkpoint file: " + path.string());
  if (get_le<std::uint32_t>(is, path) != kVersion) throw FileError("unsupported checkpoint version");
  CheckpointData out;
  out.scalar_bytes = get_le<std::uint32_t>(is, path);
  if (out.scalar_bytes != 4 && out.scalar_bytes != 8) throw FileError("bad scalar width in checkpoint");
  const auto count = get_le<std::uint64_t>(is, path);
  for (std::uint64_t k = 0; k < count; ++k) {
    NamedTensor t;
    const auto name_len = get_le<std::uint32_t>(is, path);
    t.name.resize(name_len);
    is.read(t.name.data(), name_len);
    const auto rank = get_le<std::uint32_t>(is, path);
    for (std::uint32_t d = 0; d < rank; ++d) t.shape.push_back(get_le<std::uint64_t>(is, path));
    const std::size_t n = shape_size(t.shape);
    t.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      t.values[i] = out.scalar_bytes == 4 ? static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(is, path)))
                                          : std::bit_cast<double>(get_le<std::uint64_t>(is, path));
    }
    out.tensors.push_back(std::move(t));
  }
  return out;
}

template <typename T>
void load_checkpoint(const std::filesystem::path& path, const ParameterRegistry<T>& params) {
  CheckpointData data = read_checkpoint(path);
  if (data.scalar_bytes != sizeof(T)) {
    throw FileError("checkpoint stores " + std::to_string(data.scalar_bytes * 8) + "-bit values, expected " +
                    std::to_string(sizeof(T) * 8));
  }
  for (const auto& e : params.entries()) {
    const NamedTensor* found = nullptr;
    for (const NamedTensor& t : data.tensors)
      if (t.name == e.name) found = &t;
    if (!found) throw FileError("checkpoint lacks parameter '" + e.name + "'");
    if (found->shape != e.param->value.shape()) {
      throw FileError("checkpoint shape mismatch for '" + e.name + "': " + shape_str(found->shape) + " vs " +
                      shape_str(e.param->value.shape()));
    }
    auto dst = e.param->value.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(found->values[i]);
  }
}

template void save_checkpoint(const std::filesystem::path&, const ParameterRegistry<float>&);
template void save_checkpoint(const std::filesystem::path&, const ParameterRegistry<double>&);
template void load_checkpoint(const std::filesystem::path&, const ParameterRegistry<float>&);
template void load_checkpoint(const std::filesystem::path&, const ParameterRegistry<double>&);

}  // namespace avf
