// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

// Portable tensor file (PTF):
//
//   offset 0  magic "PTF1"
//   offset 4  dtype code (0 = float32, 1 = uint32, 2 = float64)
//   offset 5  ndim
//   offset 6  ndim x uint32 little-endian dims
//   then      row-major little-endian payload

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "petcond/tensor.hpp"

namespace petcond::ptf {

enum class DType : std::uint8_t { Float32 = 0, UInt32 = 1, Float64 = 2 };

using AnyTensor = std::variant<Tensor<float>, Tensor<std::uint32_t>, Tensor<double>>;

DType dtype_of(const AnyTensor& tensor);

std::vector<std::uint8_t> encode(const AnyTensor& tensor);

/// Throws IoError naming the byte offset of the first malformed field.
AnyTensor decode(std::span<const std::uint8_t> bytes);

void write(const std::filesystem::path& path, const AnyTensor& tensor);
AnyTensor read(const std::filesystem::path& path);

template <typename T>
Tensor<T> read_as(const std::filesystem::path& path) {
  AnyTensor any = read(path);
  if (auto* t = std::get_if<Tensor<T>>(&any)) return std::move(*t);
  throw IoError("PTF file " + path.string() + " has unexpected dtype");
}

}  // namespace petcond::ptf
