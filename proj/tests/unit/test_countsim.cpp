// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "petcond/countsim.hpp"
#include "petcond/errors.hpp"
#include "support.hpp"

using namespace petcond;
using Catch::Approx;

TEST_CASE("count levels parse, reduce and order exactly", "[countsim]") {
  CHECK(CountLevel::parse("1/100").label() == "1/100");
  CHECK(CountLevel::parse("2/200") == CountLevel::parse("1/100"));
  CHECK(CountLevel::parse("full").is_full());
  CHECK(CountLevel::parse("1") == CountLevel::full());
  CHECK(CountLevel::parse("4/4").label() == "full");
  CHECK(CountLevel::parse("1/4").file_tag() == "1-4");
  CHECK(CountLevel::parse("1/20").value() == Approx(0.05));
  CHECK(CountLevel::parse("1/3") < CountLevel::parse("1/2"));
  CHECK(CountLevel::parse("333333333/1000000000") < CountLevel::parse("1/3"));

  CHECK_THROWS_AS(CountLevel::parse("0/5"), ConfigError);
  CHECK_THROWS_AS(CountLevel::parse("3/2"), ConfigError);
  CHECK_THROWS_AS(CountLevel::parse("half"), ConfigError);
  CHECK_THROWS_AS(CountLevel::fraction(1, 0), ConfigError);
}

TEST_CASE("registry lists the six levels in ascending order", "[countsim]") {
  const auto levels = registry();
  REQUIRE(levels.size() == 6);
  CHECK(levels[0].label() == "1/100");
  CHECK(levels[1].label() == "1/20");
  CHECK(levels[2].label() == "1/10");
  CHECK(levels[3].label() == "1/4");
  CHECK(levels[4].label() == "1/2");
  CHECK(levels[5].is_full());
  CHECK(levels[5].value() == 1.0);
  CHECK(std::is_sorted(levels.begin(), levels.end()));
}

TEST_CASE("thinning to full copies the counts", "[countsim]") {
  auto img = testing::constant_counts(8, 8, 17);
  img.counts[5] = 0;
  const auto out = thin(img, CountLevel::full(), 3);
  CHECK(out.counts == img.counts);
  CHECK(out.level.is_full());
}

TEST_CASE("thinning only starts from a full-count image", "[countsim]") {
  const auto img = testing::constant_counts(4, 4, 10);
  const auto half = thin(img, CountLevel::parse("1/2"), 1);
  CHECK(half.level == CountLevel::parse("1/2"));
  CHECK_THROWS_AS(thin(half, CountLevel::parse("1/4"), 1), ConfigError);
}

TEST_CASE("binomial thinning moments at p = 1/2", "[countsim]") {
  const auto img = testing::constant_counts(64, 64, 1000);
  const auto out = thin(img, CountLevel::parse("1/2"), 2024);
  const double n = static_cast<double>(out.counts.size());
  double mean = 0.0;
  for (auto c : out.counts) mean += c;
  mean /= n;
  double var = 0.0;
  for (auto c : out.counts) var += (c - mean) * (c - mean);
  var /= n - 1;
  CHECK(std::abs(mean - 500.0) <= 1.0);
  CHECK(std::abs(var - 250.0) <= 25.0);
  for (std::size_t i = 0; i < out.counts.size(); ++i) CHECK(out.counts[i] <= img.counts[i]);
}

TEST_CASE("vanishing retention leaves almost no counts", "[countsim]") {
  const auto img = testing::constant_counts(64, 64, 1000);
  const auto out = thin(img, CountLevel::fraction(1, 1000000), 11);
  CHECK(out.total() <= 50);
}

TEST_CASE("thinning is deterministic per seed", "[countsim]") {
  const auto img = testing::constant_counts(16, 16, 300);
  const auto level = CountLevel::parse("1/10");
  CHECK(thin(img, level, 5).counts == thin(img, level, 5).counts);
  CHECK(thin(img, level, 5).counts != thin(img, level, 6).counts);
}

TEST_CASE("normalize divides by level and scale", "[countsim]") {
  CountImage img = testing::constant_counts(3, 3, 100);
  img.level = CountLevel::parse("1/2");
  const auto s = normalize(img, 100.0);
  for (double v : s.intensity) CHECK(v == 2.0);
  CHECK(s.level == img.level);

  CountImage full = testing::constant_counts(2, 2, 7);
  full.counts[3] = 9;
  const auto id = normalize(full, 1.0);
  CHECK(id.intensity == std::vector<double>{7, 7, 7, 9});

  CHECK_THROWS_AS(normalize(full, 0.0), ConfigError);
  CHECK_THROWS_AS(normalize(full, -1.0), ConfigError);
}

TEST_CASE("percentile uses linear interpolation between order statistics", "[countsim]") {
  std::vector<double> v{4, 1, 3, 2};
  // Oracle: rank = q (n - 1), interpolate between neighbours of the sorted list.
  auto oracle = [](std::vector<double> x, double q) {
    std::sort(x.begin(), x.end());
    const double r = q / 100.0 * static_cast<double>(x.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(r));
    const auto hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (r - static_cast<double>(lo)) * (x[hi] - x[lo]);
  };
  for (double q : {0.0, 10.0, 50.0, 99.5, 100.0}) CHECK(percentile(v, q) == Approx(oracle(v, q)));
  CHECK(percentile(v, 50.0) == 2.5);
}

TEST_CASE("global scale is the 99.5th percentile of pooled full-count pixels", "[countsim]") {
  const std::vector<CountImage> one{testing::constant_counts(8, 8, 42)};
  CHECK(compute_global_scale(one) == 42.0);

  const std::vector<CountImage> two{testing::constant_counts(8, 8, 1),
                                    testing::constant_counts(8, 8, 100)};
  CHECK(compute_global_scale(two) == 100.0);

  CHECK_THROWS_AS(compute_global_scale(std::vector<CountImage>{}), ConfigError);
  CHECK_THROWS_AS(compute_global_scale(std::vector<CountImage>{testing::constant_counts(4, 4, 0)}),
                  ConfigError);
}
