// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace petcond {

/// Fraction of the full acquisition's counts, kept as a reduced rational in (0, 1].
class CountLevel {
 public:
  /// The full count (value 1).
  CountLevel() = default;

  /// Throws ConfigError unless 0 < numerator <= denominator.
  static CountLevel fraction(std::uint64_t numerator, std::uint64_t denominator);
  static CountLevel full() { return CountLevel{}; }

  /// Accepts "full", "1", or "N/D".
  static CountLevel parse(std::string_view label);

  std::uint64_t numerator() const noexcept { return num_; }
  std::uint64_t denominator() const noexcept { return den_; }
  double value() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }
  bool is_full() const noexcept { return num_ == den_; }

  /// "full" for the full level, "N/D" otherwise.
  std::string label() const;
  /// Filesystem-safe form of the label ("1-100", "full").
  std::string file_tag() const;

  std::strong_ordering operator<=>(const CountLevel& other) const noexcept;
  bool operator==(const CountLevel& other) const noexcept = default;

 private:
  CountLevel(std::uint64_t n, std::uint64_t d) : num_(n), den_(d) {}

  std::uint64_t num_ = 1;
  std::uint64_t den_ = 1;
};

/// 1/100, 1/20, 1/10, 1/4, 1/2, full; ascending.
std::vector<CountLevel> registry();

struct CountImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint32_t> counts;
  CountLevel level;
  std::string source_id;

  std::uint64_t total() const;
};

/// Duration-corrected intensity image; all levels of one dataset share `scale`.
struct ImageSlice {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> intensity;
  CountLevel level;
  double scale = 1.0;
};

/// Binomial thinning: each count survives independently with probability target.value().
/// Requires a full-level input.
CountImage thin(const CountImage& full, CountLevel target, std::uint64_t seed);

/// intensity = counts / (level.value * global_scale).
ImageSlice normalize(const CountImage& image, double global_scale);

/// 99.5th percentile (linear interpolation) of pooled duration-corrected intensities.
double compute_global_scale(std::span<const CountImage> training_full_slices);

/// Percentile in [0, 100] with linear interpolation between order statistics.
double percentile(std::vector<double> values, double pct);

}  // namespace petcond
