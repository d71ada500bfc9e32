// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "petcond/errors.hpp"
#include "petcond/phantom.hpp"
#include "petcond/ptf.hpp"

using namespace petcond;

TEST_CASE("an empty composition is all zero", "[phantom]") {
  PhantomSpec spec;
  spec.n_background_ellipses = 0;
  spec.n_lesions = 0;
  const auto map = generate_phantom(spec);
  REQUIRE(map.values.size() == 64 * 64);
  CHECK(std::all_of(map.values.begin(), map.values.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("phantoms are deterministic per seed and nonnegative", "[phantom]") {
  PhantomSpec spec;
  spec.seed = 9;
  const auto a = generate_phantom(spec);
  const auto b = generate_phantom(spec);
  CHECK(a.values == b.values);
  CHECK(*std::min_element(a.values.begin(), a.values.end()) >= 0.0);
  spec.seed = 10;
  CHECK(generate_phantom(spec).values != a.values);
}

TEST_CASE("invalid specs are rejected", "[phantom]") {
  PhantomSpec small;
  small.size = 8;
  CHECK_THROWS_AS(generate_phantom(small), ConfigError);
  PhantomSpec inverted;
  inverted.lesion_intensity = {4.0, 1.0};
  CHECK_THROWS_AS(generate_phantom(inverted), ConfigError);
  PhantomSpec negative;
  negative.background_intensity = {-1.0, 1.0};
  CHECK_THROWS_AS(inverted.validate(), ConfigError);
  CHECK_THROWS_AS(negative.validate(), ConfigError);
}

TEST_CASE("seed 1 phantom matches the stored golden map", "[phantom]") {
  PhantomSpec spec;
  spec.seed = 1;
  const auto map = generate_phantom(spec);
  const double bound = static_cast<double>(spec.n_background_ellipses) *
                           spec.background_intensity.high +
                       static_cast<double>(spec.n_lesions) * spec.lesion_intensity.high;
  const double peak = *std::max_element(map.values.begin(), map.values.end());
  CHECK(peak > 0.0);
  CHECK(peak <= bound);

  const std::filesystem::path golden = std::string(PETCOND_TEST_DATA) + "/phantom_seed1.ptf";
  if (std::getenv("PETCOND_UPDATE_GOLDEN") != nullptr)
    ptf::write(golden, Tensor<double>({map.size, map.size}, map.values));
  REQUIRE(std::filesystem::exists(golden));
  const auto stored = ptf::read_as<double>(golden);
  REQUIRE(stored.shape == Shape{64, 64});
  for (std::size_t i = 0; i < stored.data.size(); ++i)
    REQUIRE(map.values[i] == Catch::Approx(stored.data[i]).margin(1e-12));
}

TEST_CASE("full-count synthesis", "[phantom]") {
  ActivityMap uniform{64, std::vector<double>(64 * 64, 0.3), 0};

  SECTION("zero total gives zero counts") {
    const auto img = synthesize_full_count(uniform, 0, 1);
    CHECK(img.total() == 0);
    CHECK(img.level.is_full());
  }
  SECTION("uniform activity has the Poisson mean") {
    const auto img = synthesize_full_count(uniform, 4096ULL * 1000, 77);
    const double mean = static_cast<double>(img.total()) / 4096.0;
    CHECK(std::abs(mean - 1000.0) <= 1.0);
  }
  SECTION("deterministic per seed") {
    CHECK(synthesize_full_count(uniform, 50000, 3).counts ==
          synthesize_full_count(uniform, 50000, 3).counts);
  }
  SECTION("all-zero activity cannot be normalized") {
    ActivityMap zero{16, std::vector<double>(256, 0.0), 0};
    CHECK_THROWS_AS(synthesize_full_count(zero, 100, 1), ConfigError);
  }
}
