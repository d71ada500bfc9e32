// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "petcond/countsim.hpp"
#include "petcond/metrics.hpp"

namespace petcond {

/// 8-bit grayscale PNG.
void write_png_gray(const std::filesystem::path& file, std::size_t width, std::size_t height,
                    std::span<const std::uint8_t> pixels);

struct PngInfo {
  std::size_t width = 0;
  std::size_t height = 0;
  int bit_depth = 0;
  int color_type = 0;
};

PngInfo read_png_info(const std::filesystem::path& file);

struct MontageGeometry {
  std::size_t rows = 2;
  std::size_t cols = 0;
  std::size_t tile_height = 0;
  std::size_t tile_width = 0;
  std::size_t zoom = 2;
  std::size_t gap = 2;

  std::size_t width() const { return cols * tile_width * zoom + (cols + 1) * gap; }
  std::size_t height() const { return rows * tile_height * zoom + (rows + 1) * gap; }
};

/// Two-row comparison montage. Column 0 holds the full-count reference in both rows;
/// column i > 0 holds originals[i-1] (top) and denoised[i-1] (bottom). Every tile
/// shares the display window [0, reference max].
struct Montage {
  MontageGeometry geometry;
  std::vector<std::string> column_labels;
  std::vector<std::uint8_t> pixels;
};

Montage build_montage(const ImageSlice& reference, const std::vector<ImageSlice>& originals,
                      const std::vector<ImageSlice>& denoised);

/// Writes <stem>.png and a <stem>.json layout sidecar.
void write_montage(const Montage& montage, const std::filesystem::path& png_file);

/// level_label,original_PSNR,denoised_PSNR,original_SSIM,denoised_SSIM (one row per level).
void write_grouped_csv(const std::vector<MetricRecord>& grid, const std::filesystem::path& file);

/// Markdown comparison table over {original, gaussian, plain-unet, proposed}.
std::string comparison_table(const std::vector<MetricRecord>& comparison, double best_sigma);

}  // namespace petcond
