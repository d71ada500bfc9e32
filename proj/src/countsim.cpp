// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include "petcond/countsim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>

#include <boost/random/binomial_distribution.hpp>

#include "petcond/errors.hpp"
#include "petcond/rng.hpp"

namespace petcond {

CountLevel CountLevel::fraction(std::uint64_t numerator, std::uint64_t denominator) {
  if (numerator == 0 || denominator == 0 || numerator > denominator)
    throw ConfigError("count level must lie in (0, 1], got " + std::to_string(numerator) +
                      "/" + std::to_string(denominator));
  if (denominator > (1ULL << 32))
    throw ConfigError("count level denominator too large");
  const std::uint64_t g = std::gcd(numerator, denominator);
  return CountLevel(numerator / g, denominator / g);
}

CountLevel CountLevel::parse(std::string_view label) {
  if (label == "full" || label == "1") return full();
  const auto slash = label.find('/');
  if (slash == std::string_view::npos)
    throw ConfigError("unrecognized count level '" + std::string(label) + "'");
  auto parse_part = [&](std::string_view part) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc{} || ptr != part.data() + part.size())
      throw ConfigError("unrecognized count level '" + std::string(label) + "'");
    return v;
  };
  return fraction(parse_part(label.substr(0, slash)), parse_part(label.substr(slash + 1)));
}

std::string CountLevel::label() const {
  if (is_full()) return "full";
  return std::to_string(num_) + "/" + std::to_string(den_);
}

std::string CountLevel::file_tag() const {
  if (is_full()) return "full";
  return std::to_string(num_) + "-" + std::to_string(den_);
}

std::strong_ordering CountLevel::operator<=>(const CountLevel& other) const noexcept {
  // Exact comparison by cross-multiplication.
  const auto lhs = static_cast<unsigned __int128>(num_) * other.den_;
  const auto rhs = static_cast<unsigned __int128>(other.num_) * den_;
  return lhs <=> rhs;
}

std::vector<CountLevel> registry() {
  return {CountLevel::fraction(1, 100), CountLevel::fraction(1, 20),
          CountLevel::fraction(1, 10),  CountLevel::fraction(1, 4),
          CountLevel::fraction(1, 2),   CountLevel::full()};
}

std::uint64_t CountImage::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

CountImage thin(const CountImage& full, CountLevel target, std::uint64_t seed) {
  if (!full.level.is_full())
    throw ConfigError("thin requires a full-count input, got level " + full.level.label());
  CountImage out = full;
  out.level = target;
  if (target.is_full()) return out;

  const double p = target.value();
  Rng rng(seed);
  // Boost's BTRD sampler: libstdc++'s binomial is measurably biased at small n*p.
  for (auto& c : out.counts) {
    if (c == 0) continue;
    boost::random::binomial_distribution<std::int64_t> draw(static_cast<std::int64_t>(c), p);
    c = static_cast<std::uint32_t>(draw(rng));
  }
  return out;
}

ImageSlice normalize(const CountImage& image, double global_scale) {
  if (!(global_scale > 0.0) || !std::isfinite(global_scale))
    throw ConfigError("normalization scale must be positive and finite");
  ImageSlice slice;
  slice.height = image.height;
  slice.width = image.width;
  slice.level = image.level;
  slice.scale = global_scale;
  const double denom = image.level.value() * global_scale;
  slice.intensity.resize(image.counts.size());
  std::transform(image.counts.begin(), image.counts.end(), slice.intensity.begin(),
                 [denom](std::uint32_t c) { return static_cast<double>(c) / denom; });
  return slice;
}

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw ConfigError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double rank = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double compute_global_scale(std::span<const CountImage> training_full_slices) {
  if (training_full_slices.empty())
    throw ConfigError("global scale needs at least one training slice");
  std::vector<double> pooled;
  for (const auto& img : training_full_slices) {
    const auto s = normalize(img, 1.0);
    pooled.insert(pooled.end(), s.intensity.begin(), s.intensity.end());
  }
  const double scale = percentile(std::move(pooled), 99.5);
  if (!(scale > 0.0))
    throw ConfigError("training slices have a zero 99.5th-percentile intensity");
  return scale;
}

}  // namespace petcond
