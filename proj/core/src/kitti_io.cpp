// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rvseg/kitti_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "rvseg/errors.hpp"

namespace rvseg {
namespace {

std::vector<char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<char> buf(size);
  if (size > 0 && !in.read(buf.data(), static_cast<std::streamsize>(size))) {
    throw DataError("short read from " + path.string());
  }
  return buf;
}

std::uint32_t load_le_u32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
  return v;
}

void store_le_u32(char* p, std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
  std::memcpy(p, &v, 4);
}

void write_all(const std::filesystem::path& path, const std::vector<char>& buf) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot create " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

PointCloud read_kitti_points(const std::filesystem::path& path) {
  const auto buf = read_all(path);
  if (buf.size() % 16 != 0) {
    throw DataError(path.string() + ": size " + std::to_string(buf.size()) +
                    " is not a multiple of 16 bytes");
  }
  const std::size_t n = buf.size() / 16;
  PointCloud pc;
  pc.x.resize(n);
  pc.y.resize(n);
  pc.z.resize(n);
  pc.r.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::array<float, 4> q;
    for (int k = 0; k < 4; ++k) q[k] = std::bit_cast<float>(load_le_u32(buf.data() + i * 16 + k * 4));
    pc.x[i] = q[0];
    pc.y[i] = q[1];
    pc.z[i] = q[2];
    pc.r[i] = q[3];
  }
  return pc;
}

std::vector<int> read_kitti_labels(const std::filesystem::path& path) {
  const auto buf = read_all(path);
  if (buf.size() % 4 != 0) {
    throw DataError(path.string() + ": size is not a multiple of 4 bytes");
  }
  std::vector<int> labels(buf.size() / 4);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = static_cast<int>(load_le_u32(buf.data() + i * 4) & 0xFFFFu);
  }
  return labels;
}

PointCloud read_kitti_scan(const std::filesystem::path& bin_path,
                           const std::filesystem::path& label_path) {
  PointCloud pc = read_kitti_points(bin_path);
  if (!label_path.empty()) {
    pc.labels = read_kitti_labels(label_path);
    if (pc.labels.size() != pc.size()) {
      throw DataError(label_path.string() + ": " + std::to_string(pc.labels.size()) +
                      " labels for " + std::to_string(pc.size()) + " points");
    }
  }
  return pc;
}

void write_kitti_points(const std::filesystem::path& path, const PointCloud& pc) {
  std::vector<char> buf(pc.size() * 16);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const std::array<float, 4> q{pc.x[i], pc.y[i], pc.z[i], pc.r[i]};
    for (int k = 0; k < 4; ++k) store_le_u32(buf.data() + i * 16 + k * 4, std::bit_cast<std::uint32_t>(q[k]));
  }
  write_all(path, buf);
}

void write_kitti_labels(const std::filesystem::path& path, std::span<const int> labels) {
  std::vector<char> buf(labels.size() * 4);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] > 0xFFFF) {
      throw DataError("label " + std::to_string(labels[i]) + " does not fit in 16 bits");
    }
    store_le_u32(buf.data() + i * 4, static_cast<std::uint32_t>(labels[i]));
  }
  write_all(path, buf);
}

}  // namespace rvseg
