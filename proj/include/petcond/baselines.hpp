// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "petcond/checkpoint.hpp"
#include "petcond/countsim.hpp"
#include "petcond/dataset.hpp"
#include "petcond/metrics.hpp"
#include "petcond/trainer.hpp"

namespace petcond {

/// Unit-sum 1-D Gaussian with radius ceil(4 sigma); sigma = 0 gives the single tap {1}.
std::vector<double> gaussian_kernel(double sigma);

/// Separable 2-D Gaussian blur with half-sample symmetric reflection at the borders.
/// Throws ConfigError for negative sigma.
ImageSlice gaussian_denoise(const ImageSlice& slice, double sigma);

inline const std::vector<double>& default_gaussian_sigmas() {
  static const std::vector<double> sigmas{0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0};
  return sigmas;
}

/// The fixed-pair plain U-Net baseline: the conditional backbone with gates removed,
/// trained only on (1/100 -> full). `model_config.gated` is ignored.
Checkpoint train_plain_unet(const DatasetManifest& manifest, const ModelConfig& model_config,
                            const TrainConfig& train_config, const TrainOptions& options = {});

/// Denoises with whichever kind of model the checkpoint holds.
ImageSlice apply_checkpoint(const Checkpoint& checkpoint, const ImageSlice& slice,
                            const CountLevel& level_in, const CountLevel& level_out);

struct Comparison {
  CountLevel level;
  std::vector<MetricRecord> records;  // conditions: original, gaussian, plain-unet, proposed
  double best_sigma = 0.0;
};

/// Low-level -> full comparison on the test slices. The Gaussian sigma is the sweep
/// value with the best mean PSNR. `plain` may be null (row omitted).
Comparison compare_methods(const std::vector<SliceSet>& test_slices, const CountLevel& level,
                           const Checkpoint& proposed, const Checkpoint* plain,
                           const std::vector<double>& sigmas = default_gaussian_sigmas());

}  // namespace petcond
