// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "petcond/baselines.hpp"
#include "petcond/errors.hpp"
#include "support.hpp"

using namespace petcond;
using Catch::Approx;

TEST_CASE("sigma zero is the identity", "[baselines]") {
  const auto s = testing::random_slice(9, 7, 1);
  CHECK(gaussian_denoise(s, 0.0).intensity == s.intensity);
  CHECK(gaussian_kernel(0.0) == std::vector<double>{1.0});
  CHECK_THROWS_AS(gaussian_denoise(s, -0.5), ConfigError);
}

TEST_CASE("constant images are unchanged by smoothing", "[baselines]") {
  const auto c = testing::constant_slice(12, 10, 2.5);
  for (double sigma : {0.5, 1.0, 3.0, 6.0}) {
    const auto out = gaussian_denoise(c, sigma);
    for (double v : out.intensity) CHECK(v == Approx(2.5).epsilon(1e-12));
  }
}

TEST_CASE("an impulse reproduces the Gaussian kernel", "[baselines]") {
  auto img = testing::constant_slice(41, 41, 0.0);
  img.intensity[20 * 41 + 20] = 1.0;
  for (double sigma : {1.0, 1.5, 2.0}) {
    const auto out = gaussian_denoise(img, sigma);
    const double analytic = 1.0 / (2.0 * std::numbers::pi * sigma * sigma);
    CHECK(std::abs(out.intensity[20 * 41 + 20] - analytic) < 1e-3);
    double total = 0.0;
    for (double v : out.intensity) total += v;
    CHECK(total == Approx(1.0).epsilon(1e-12));
    CHECK(out.intensity[20 * 41 + 21] == Approx(out.intensity[21 * 41 + 20]));
  }
}

TEST_CASE("kernel taps are symmetric and normalized", "[baselines]") {
  const auto k = gaussian_kernel(1.25);
  CHECK(k.size() == 2 * 5 + 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    sum += k[i];
    CHECK(k[i] == k[k.size() - 1 - i]);
  }
  CHECK(sum == Approx(1.0).epsilon(1e-15));
}
