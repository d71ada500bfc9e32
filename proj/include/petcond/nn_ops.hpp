// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

// Forward/backward kernels for NCHW feature maps. Instantiated for float and double.
// Backward kernels accumulate (+=) into parameter gradients and overwrite input
// gradients.

#pragma once

#include <span>
#include <vector>

#include "petcond/tensor.hpp"

namespace petcond::nn {

inline constexpr double kGroupNormEps = 1e-5;

/// Same-padded, stride-1 convolution; weight is [cout, cin, k, k], bias [cout].
template <typename T>
void conv2d_forward(const Tensor<T>& x, std::span<const T> weight, std::span<const T> bias,
                    std::size_t cout, std::size_t kernel, Tensor<T>& y);

/// dx may be null when the input gradient is not needed.
template <typename T>
void conv2d_backward(const Tensor<T>& x, std::span<const T> weight, std::size_t cout,
                     std::size_t kernel, const Tensor<T>& dy, Tensor<T>* dx,
                     std::span<T> dweight, std::span<T> dbias);

template <typename T>
void group_norm_forward(const Tensor<T>& x, std::span<const T> gamma, std::span<const T> beta,
                        std::size_t groups, Tensor<T>& y, std::vector<double>& mean,
                        std::vector<double>& rstd);

template <typename T>
void group_norm_backward(const Tensor<T>& x, std::span<const T> gamma, std::size_t groups,
                         const std::vector<double>& mean, const std::vector<double>& rstd,
                         const Tensor<T>& dy, Tensor<T>& dx, std::span<T> dgamma,
                         std::span<T> dbeta);

template <typename T>
void silu_forward(const Tensor<T>& x, Tensor<T>& y);

template <typename T>
void silu_backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dx);

template <typename T>
void avg_pool2_forward(const Tensor<T>& x, Tensor<T>& y);

template <typename T>
void avg_pool2_backward(const Tensor<T>& dy, Tensor<T>& dx);

template <typename T>
void upsample2_forward(const Tensor<T>& x, Tensor<T>& y);

template <typename T>
void upsample2_backward(const Tensor<T>& dy, Tensor<T>& dx);

/// y = [a, b] along channels.
template <typename T>
void concat_channels(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& y);

template <typename T>
void split_channels(const Tensor<T>& dy, std::size_t channels_a, Tensor<T>& da, Tensor<T>& db);

/// g[b, c] = bias[c] + sum_d weight[c, d] * emb[b, d];  y[b, c, h, w] = g[b, c] * x[b, c, h, w].
template <typename T>
void gate_forward(const Tensor<T>& x, const Tensor<T>& emb, std::span<const T> weight,
                  std::span<const T> bias, Tensor<T>& y, Tensor<T>& g);

template <typename T>
void gate_backward(const Tensor<T>& x, const Tensor<T>& emb, const Tensor<T>& g,
                   const Tensor<T>& dy, Tensor<T>& dx, std::span<T> dweight, std::span<T> dbias);

}  // namespace petcond::nn
