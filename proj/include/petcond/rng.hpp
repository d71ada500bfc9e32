// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace petcond {

using Rng = std::mt19937_64;

/// Per-slice seed: base_seed XOR slice_index.
constexpr std::uint64_t slice_seed(std::uint64_t base_seed, std::uint64_t slice_index) {
  return base_seed ^ slice_index;
}

/// splitmix64 finalizer; separates independent streams derived from one seed.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Textual engine state (the standard stream format of mersenne_twister_engine).
std::string save_rng(const Rng& rng);
Rng load_rng(const std::string& state);

}  // namespace petcond
