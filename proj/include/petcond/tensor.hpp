// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <new>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "petcond/errors.hpp"

namespace petcond {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

/// 64-byte aligned storage. Eigen picks its vectorized peeling from the data
/// address, so a fixed alignment keeps floating-point results identical across runs.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}  // NOLINT

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense row-major tensor with value semantics.
template <typename T>
struct Tensor {
  using value_type = T;

  Shape shape;
  AlignedVector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T{})
      : shape(std::move(s)), data(element_count(shape), fill) {}
  Tensor(Shape s, std::initializer_list<T> values) : shape(std::move(s)), data(values) { check(); }
  template <typename Range>
  Tensor(Shape s, const Range& values)
      : shape(std::move(s)), data(std::begin(values), std::end(values)) {
    check();
  }

  std::size_t size() const noexcept { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  std::span<T> span() noexcept { return data; }
  std::span<const T> span() const noexcept { return data; }

  bool operator==(const Tensor&) const = default;

 private:
  void check() const {
    if (data.size() != element_count(shape))
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_string(shape));
  }
};

}  // namespace petcond
