// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "petcond/errors.hpp"
#include "petcond/ptf.hpp"
#include "support.hpp"

using namespace petcond;

namespace {

template <typename T>
bool same_bits(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape == b.shape && a.data.size() == b.data.size() &&
         std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(T)) == 0;
}

std::string error_of(const std::vector<std::uint8_t>& bytes) {
  try {
    ptf::decode(bytes);
  } catch (const IoError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("every dtype round-trips bit-exact through a file", "[ptf]") {
  const auto dir = testing::scratch_dir("ptf_roundtrip");
  Tensor<float> f({2, 3}, {0.f, -0.f, 1.5f, std::numeric_limits<float>::denorm_min(),
                           std::numeric_limits<float>::max(), -3.25f});
  Tensor<double> d({5}, {std::acos(-1.0), -0.0, 1e-310, 1e300, std::nan("7")});
  Tensor<std::uint32_t> u({2, 2, 1}, {0u, 1u, 0xFFFFFFFFu, 123456u});

  ptf::write(dir / "f.ptf", f);
  ptf::write(dir / "d.ptf", d);
  ptf::write(dir / "u.ptf", u);
  CHECK(same_bits(ptf::read_as<float>(dir / "f.ptf"), f));
  CHECK(same_bits(ptf::read_as<double>(dir / "d.ptf"), d));
  CHECK(same_bits(ptf::read_as<std::uint32_t>(dir / "u.ptf"), u));
  CHECK(ptf::dtype_of(ptf::read(dir / "u.ptf")) == ptf::DType::UInt32);
}

TEST_CASE("header layout is magic, dtype, ndim, little-endian dims", "[ptf]") {
  Tensor<std::uint32_t> u({3, 258}, 7u);
  const auto bytes = ptf::encode(u);
  REQUIRE(bytes.size() == 4 + 1 + 1 + 2 * 4 + 3 * 258 * 4);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "PTF1");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 2);
  CHECK(bytes[6] == 3);
  CHECK(bytes[10] == 2);  // 258 = 0x0102
  CHECK(bytes[11] == 1);
  CHECK(bytes[14] == 7);
}

TEST_CASE("malformed payloads report the failing byte offset", "[ptf]") {
  auto good = ptf::encode(Tensor<float>({2, 2}, 1.f));

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THAT(error_of(bad_magic), Catch::Matchers::ContainsSubstring("offset 0"));

  auto bad_dtype = good;
  bad_dtype[4] = 9;
  CHECK_THAT(error_of(bad_dtype), Catch::Matchers::ContainsSubstring("offset 4"));

  auto truncated = good;
  truncated.resize(truncated.size() - 3);
  CHECK_THAT(error_of(truncated), Catch::Matchers::ContainsSubstring("offset 14"));

  auto trailing = good;
  trailing.push_back(0);
  CHECK_FALSE(error_of(trailing).empty());

  CHECK_THROWS_AS(ptf::read("/nonexistent/dir/x.ptf"), IoError);
}

TEST_CASE("read_as rejects a mismatched dtype", "[ptf]") {
  const auto dir = testing::scratch_dir("ptf_dtype");
  ptf::write(dir / "u.ptf", Tensor<std::uint32_t>({1}, 3u));
  CHECK_THROWS_AS(ptf::read_as<float>(dir / "u.ptf"), IoError);
}
