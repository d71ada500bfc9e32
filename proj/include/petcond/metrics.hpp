// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "petcond/countsim.hpp"
#include "petcond/dataset.hpp"

namespace petcond {

struct Checkpoint;

/// Read-only view of a row-major 2-D image.
struct ImageView {
  std::span<const double> data;
  std::size_t height = 0;
  std::size_t width = 0;

  ImageView() = default;
  ImageView(std::span<const double> d, std::size_t h, std::size_t w)
      : data(d), height(h), width(w) {}
  ImageView(const ImageSlice& s) : data(s.intensity), height(s.height), width(s.width) {}  // NOLINT
};

double mse(const ImageView& a, const ImageView& b);

/// 10 log10(range^2 / MSE) in dB; +infinity when the images are identical.
double psnr(const ImageView& pred, const ImageView& ref, double data_range);

struct SsimParams {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;

  double c1() const { return (k1 * data_range) * (k1 * data_range); }
  double c2() const { return (k2 * data_range) * (k2 * data_range); }
  void validate() const;
};

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
std::vector<double> ssim_window_1d(const SsimParams& params);

/// Mean SSIM over all valid (unpadded) window positions, luminance and merged
/// contrast-structure terms (C3 = C2 / 2). Throws ShapeError on mismatched shapes
/// or an image smaller than the window.
double ssim(const ImageView& a, const ImageView& b, const SsimParams& params);

struct MetricRecord {
  CountLevel level;
  std::string condition;  // original | denoised | gaussian | plain-unet | proposed
  std::string metric;     // PSNR | SSIM
  double value = 0.0;
  std::size_t n_slices = 0;
  std::string data_range_policy = "per-slice-reference-max";

  bool operator==(const MetricRecord&) const = default;
};

struct SliceScores {
  double psnr = 0.0;
  double ssim = 0.0;
  double data_range = 0.0;
};

/// PSNR and SSIM against a reference, data range = reference maximum.
SliceScores score_slice(const ImageSlice& pred, const ImageSlice& ref);

/// For each level: original-vs-full and denoise(level -> full)-vs-full, PSNR and SSIM,
/// averaged over the slices. A level equal to full propagates the model's
/// ConstraintError.
std::vector<MetricRecord> evaluate_grid(const Checkpoint& checkpoint,
                                        const std::vector<SliceSet>& test_slices,
                                        const std::vector<CountLevel>& levels);

/// Loads the manifest's test split (throws IoError if full-count references are missing).
std::vector<MetricRecord> evaluate_grid(const Checkpoint& checkpoint,
                                        const DatasetManifest& manifest,
                                        const std::vector<CountLevel>& levels);

/// Schema: level_label,condition,metric,value,n_slices,data_range_policy
void write_metric_csv(const std::vector<MetricRecord>& records, const std::filesystem::path& file);
std::vector<MetricRecord> read_metric_csv(const std::filesystem::path& file);

/// Finds the record or throws LookupError.
const MetricRecord& find_record(const std::vector<MetricRecord>& records, const CountLevel& level,
                                const std::string& condition, const std::string& metric);

}  // namespace petcond
