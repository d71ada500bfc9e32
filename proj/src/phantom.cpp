// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include "petcond/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "petcond/errors.hpp"
#include "petcond/rng.hpp"

namespace petcond {
namespace {

void check_range(const Range& r, const char* name) {
  if (!(r.low >= 0.0) || !(r.low <= r.high) || !std::isfinite(r.high))
    throw ConfigError(std::string("phantom ") + name + " range must satisfy 0 <= low <= high");
}

struct Ellipse {
  double cx, cy, a, b, angle, intensity;
};

// Fraction of a pixel covered, with a linear falloff over one pixel around the
// boundary. The signed distance is the first-order estimate (rho - 1) / |grad rho|.
double coverage(const Ellipse& e, double x, double y) {
  const double dx = x - e.cx;
  const double dy = y - e.cy;
  const double c = std::cos(e.angle);
  const double s = std::sin(e.angle);
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  const double rho = std::hypot(u / e.a, v / e.b);
  if (rho == 0.0) return 1.0;
  const double grad = std::hypot(u / (e.a * e.a), v / (e.b * e.b)) / rho;
  const double signed_distance = (rho - 1.0) / grad;
  return std::clamp(0.5 - signed_distance, 0.0, 1.0);
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

void PhantomSpec::validate() const {
  if (size < 16) throw ConfigError("phantom size must be at least 16");
  check_range(background_intensity, "background_intensity");
  check_range(lesion_intensity, "lesion_intensity");
  check_range(lesion_radius, "lesion_radius");
}

double ActivityMap::sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }

ActivityMap generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const auto n = static_cast<double>(spec.size);
  Rng rng(spec.seed);

  std::vector<Ellipse> shapes;
  for (std::size_t i = 0; i < spec.n_background_ellipses; ++i) {
    Ellipse e{};
    e.cx = uniform(rng, 0.35 * n, 0.65 * n);
    e.cy = uniform(rng, 0.35 * n, 0.65 * n);
    e.a = uniform(rng, 0.15 * n, 0.4 * n);
    e.b = uniform(rng, 0.15 * n, 0.4 * n);
    e.angle = uniform(rng, 0.0, std::numbers::pi);
    e.intensity = uniform(rng, spec.background_intensity.low, spec.background_intensity.high);
    shapes.push_back(e);
  }
  for (std::size_t i = 0; i < spec.n_lesions; ++i) {
    Ellipse e{};
    e.cx = uniform(rng, 0.25 * n, 0.75 * n);
    e.cy = uniform(rng, 0.25 * n, 0.75 * n);
    e.a = e.b = uniform(rng, spec.lesion_radius.low, spec.lesion_radius.high);
    e.angle = 0.0;
    e.intensity = uniform(rng, spec.lesion_intensity.low, spec.lesion_intensity.high);
    shapes.push_back(e);
  }

  ActivityMap map;
  map.size = spec.size;
  map.spec_seed = spec.seed;
  map.values.assign(spec.size * spec.size, 0.0);
  for (std::size_t row = 0; row < spec.size; ++row) {
    for (std::size_t col = 0; col < spec.size; ++col) {
      const double x = static_cast<double>(col) + 0.5;
      const double y = static_cast<double>(row) + 0.5;
      double v = 0.0;
      for (const auto& e : shapes) {
        if (e.a <= 0.0 || e.b <= 0.0) continue;
        v += e.intensity * coverage(e, x, y);
      }
      map.values[row * spec.size + col] = v;
    }
  }
  return map;
}

CountImage synthesize_full_count(const ActivityMap& activity,
                                 std::uint64_t total_expected_counts, std::uint64_t seed) {
  const double total_activity = activity.sum();
  if (!(total_activity > 0.0))
    throw ConfigError("cannot synthesize counts from an all-zero activity map");

  CountImage img;
  img.height = img.width = activity.size;
  img.level = CountLevel::full();
  img.source_id = "phantom-" + std::to_string(activity.spec_seed);
  img.counts.assign(activity.values.size(), 0);
  if (total_expected_counts == 0) return img;

  const double rate = static_cast<double>(total_expected_counts) / total_activity;
  Rng rng(seed);
  for (std::size_t i = 0; i < activity.values.size(); ++i) {
    const double mean = activity.values[i] * rate;
    if (mean <= 0.0) continue;
    std::poisson_distribution<std::uint32_t> draw(mean);
    img.counts[i] = draw(rng);
  }
  return img;
}

}  // namespace petcond
