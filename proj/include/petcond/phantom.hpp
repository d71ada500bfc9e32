// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "petcond/countsim.hpp"

namespace petcond {

struct Range {
  double low = 0.0;
  double high = 0.0;
};

struct PhantomSpec {
  std::uint64_t seed = 0;
  std::size_t size = 64;
  std::size_t n_background_ellipses = 3;
  std::size_t n_lesions = 2;
  Range background_intensity{0.2, 1.0};
  Range lesion_intensity{1.0, 4.0};
  Range lesion_radius{1.5, 4.0};

  /// Throws ConfigError on size < 16 or an inverted / negative range.
  void validate() const;
};

/// size x size nonnegative activity, row-major.
struct ActivityMap {
  std::size_t size = 0;
  std::vector<double> values;
  std::uint64_t spec_seed = 0;

  double sum() const;
};

/// Soft-edged ellipses and disc lesions composited additively onto a zero field.
ActivityMap generate_phantom(const PhantomSpec& spec);

/// Independent Poisson draws with mean activity_i * total / sum(activity).
CountImage synthesize_full_count(const ActivityMap& activity,
                                 std::uint64_t total_expected_counts, std::uint64_t seed);

}  // namespace petcond
