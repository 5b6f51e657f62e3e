// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rvseg {

using Rng = std::mt19937_64;

/// Purposes for derived seed streams. Values are part of the reproducibility
/// contract; do not renumber.
enum class SeedPurpose : std::uint64_t {
  scene = 1,
  weather = 2,
  init = 3,
  shuffle = 4,
  gas_positive = 5,
  gas_negative = 6,
  rdc_augment = 7,
  sample = 8,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministically derives a child seed from a base seed and a key path,
/// e.g. derive_seed(train_seed, {epoch, batch, sample}).
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(base);
  for (auto k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t base, SeedPurpose purpose,
                                 std::initializer_list<std::uint64_t> keys = {}) {
  std::uint64_t h = derive_seed(base, {static_cast<std::uint64_t>(purpose)});
  for (auto k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

}  // namespace rvseg
