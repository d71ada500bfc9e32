// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include "petcond/ptf.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

namespace petcond::ptf {
namespace {

constexpr std::array<char, 4> kMagic = {'P', 'T', 'F', '1'};
constexpr std::size_t kHeaderFixed = 6;

template <typename T>
void append_le(std::vector<std::uint8_t>& out, T value) {
  std::array<std::uint8_t, sizeof(T)> raw{};
  std::memcpy(raw.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  out.insert(out.end(), raw.begin(), raw.end());
}

template <typename T>
T load_le(const std::uint8_t* p) {
  std::array<std::uint8_t, sizeof(T)> raw{};
  std::memcpy(raw.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  T value;
  std::memcpy(&value, raw.data(), sizeof(T));
  return value;
}

std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::Float32:
    case DType::UInt32:
      return 4;
    case DType::Float64:
      return 8;
  }
  return 0;
}

[[noreturn]] void parse_error(std::size_t offset, const std::string& what) {
  throw IoError("PTF parse error at offset " + std::to_string(offset) + ": " + what);
}

template <typename T>
Tensor<T> decode_payload(Shape shape, const std::uint8_t* p) {
  std::vector<T> values(element_count(shape));
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = load_le<T>(p + i * sizeof(T));
  return Tensor<T>(std::move(shape), std::move(values));
}

}  // namespace

DType dtype_of(const AnyTensor& tensor) {
  return static_cast<DType>(tensor.index());
}

std::vector<std::uint8_t> encode(const AnyTensor& tensor) {
  return std::visit(
      [&](const auto& t) {
        using T = typename std::decay_t<decltype(t)>::value_type;
        if (t.shape.size() > std::numeric_limits<std::uint8_t>::max())
          throw ShapeError("PTF supports at most 255 dimensions");
        std::vector<std::uint8_t> out;
        out.reserve(kHeaderFixed + 4 * t.shape.size() + sizeof(T) * t.size());
        out.insert(out.end(), kMagic.begin(), kMagic.end());
        out.push_back(static_cast<std::uint8_t>(dtype_of(tensor)));
        out.push_back(static_cast<std::uint8_t>(t.shape.size()));
        for (std::size_t d : t.shape) {
          if (d > std::numeric_limits<std::uint32_t>::max())
            throw ShapeError("PTF dimension exceeds uint32 range");
          append_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        }
        for (const T& v : t.data) append_le<T>(out, v);
        return out;
      },
      tensor);
}

AnyTensor decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderFixed) parse_error(bytes.size(), "truncated header");
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0)
    parse_error(0, "bad magic (expected \"PTF1\")");
  const std::uint8_t code = bytes[4];
  if (code > 2) parse_error(4, "unknown dtype code " + std::to_string(code));
  const auto dtype = static_cast<DType>(code);
  const std::size_t ndim = bytes[5];

  std::size_t offset = kHeaderFixed;
  Shape shape;
  shape.reserve(ndim);
  for (std::size_t i = 0; i < ndim; ++i) {
    if (offset + 4 > bytes.size()) parse_error(offset, "truncated dims");
    shape.push_back(load_le<std::uint32_t>(bytes.data() + offset));
    offset += 4;
  }
  const std::size_t expected = element_count(shape) * dtype_size(dtype);
  if (bytes.size() - offset != expected)
    parse_error(offset, "payload length " + std::to_string(bytes.size() - offset) +
                            " does not match dims " + shape_string(shape) + " (expected " +
                            std::to_string(expected) + ")");

  const std::uint8_t* payload = bytes.data() + offset;
  switch (dtype) {
    case DType::Float32:
      return decode_payload<float>(std::move(shape), payload);
    case DType::UInt32:
      return decode_payload<std::uint32_t>(std::move(shape), payload);
    case DType::Float64:
      return decode_payload<double>(std::move(shape), payload);
  }
  parse_error(4, "unknown dtype");
}

void write(const std::filesystem::path& path, const AnyTensor& tensor) {
  const auto bytes = encode(tensor);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

AnyTensor read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace petcond::ptf
