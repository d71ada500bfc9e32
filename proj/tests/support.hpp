// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

// Small helpers shared by the unit tests.

#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "petcond/countsim.hpp"

namespace petcond::testing {

/// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("petcond_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline ImageSlice random_slice(std::size_t h, std::size_t w, std::uint64_t seed, double lo = 0.0,
                               double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  ImageSlice s;
  s.height = h;
  s.width = w;
  s.intensity.resize(h * w);
  for (auto& v : s.intensity) v = u(rng);
  return s;
}

inline ImageSlice constant_slice(std::size_t h, std::size_t w, double value) {
  ImageSlice s;
  s.height = h;
  s.width = w;
  s.intensity.assign(h * w, value);
  return s;
}

inline CountImage constant_counts(std::size_t h, std::size_t w, std::uint32_t value) {
  CountImage img;
  img.height = h;
  img.width = w;
  img.counts.assign(h * w, value);
  img.level = CountLevel::full();
  img.source_id = "constant";
  return img;
}

}  // namespace petcond::testing
