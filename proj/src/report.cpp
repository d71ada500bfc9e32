// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include "petcond/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <set>
#include <sstream>

#include <json.hpp>
#include <png.h>

#include "petcond/errors.hpp"

namespace fs = std::filesystem;

namespace petcond {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string fixed(double v, int digits) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

void write_png_gray(const fs::path& file, std::size_t width, std::size_t height,
                    std::span<const std::uint8_t> pixels) {
  if (pixels.size() != width * height) throw ShapeError("PNG pixel buffer has the wrong size");
  FilePtr fp(std::fopen(file.c_str(), "wb"));
  if (!fp) throw IoError("cannot open " + file.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed writing " + file.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < height; ++r)
    png_write_row(png, const_cast<png_bytep>(pixels.data() + r * width));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

PngInfo read_png_info(const fs::path& file) {
  FilePtr fp(std::fopen(file.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + file.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8))
    throw IoError(file.string() + " is not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng failed reading " + file.string());
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  PngInfo out{png_get_image_width(png, info), png_get_image_height(png, info),
              png_get_bit_depth(png, info), png_get_color_type(png, info)};
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

Montage build_montage(const ImageSlice& reference, const std::vector<ImageSlice>& originals,
                      const std::vector<ImageSlice>& denoised) {
  if (originals.size() != denoised.size())
    throw ShapeError("montage needs one denoised image per original");
  Montage m;
  m.geometry.cols = 1 + originals.size();
  m.geometry.tile_height = reference.height;
  m.geometry.tile_width = reference.width;
  const auto& g = m.geometry;
  m.pixels.assign(g.width() * g.height(), 0);

  const double window =
      *std::max_element(reference.intensity.begin(), reference.intensity.end());
  auto blit = [&](const ImageSlice& s, std::size_t row, std::size_t col) {
    if (s.height != g.tile_height || s.width != g.tile_width)
      throw ShapeError("montage tiles must share the reference size");
    const std::size_t y0 = g.gap + row * (g.tile_height * g.zoom + g.gap);
    const std::size_t x0 = g.gap + col * (g.tile_width * g.zoom + g.gap);
    for (std::size_t r = 0; r < g.tile_height * g.zoom; ++r)
      for (std::size_t c = 0; c < g.tile_width * g.zoom; ++c) {
        const double v = s.intensity[(r / g.zoom) * s.width + c / g.zoom];
        const double t = window > 0.0 ? std::clamp(v / window, 0.0, 1.0) : 0.0;
        m.pixels[(y0 + r) * g.width() + x0 + c] = static_cast<std::uint8_t>(std::lround(t * 255.0));
      }
  };

  blit(reference, 0, 0);
  blit(reference, 1, 0);
  m.column_labels.push_back("full (reference)");
  for (std::size_t i = 0; i < originals.size(); ++i) {
    blit(originals[i], 0, i + 1);
    blit(denoised[i], 1, i + 1);
    m.column_labels.push_back(originals[i].level.label());
  }
  return m;
}

void write_montage(const Montage& montage, const fs::path& png_file) {
  const auto& g = montage.geometry;
  write_png_gray(png_file, g.width(), g.height(), montage.pixels);
  nlohmann::json j{{"rows", g.rows},
                   {"cols", g.cols},
                   {"row_labels", {"original count level", "denoised to full count"}},
                   {"column_labels", montage.column_labels},
                   {"tile_height", g.tile_height},
                   {"tile_width", g.tile_width},
                   {"zoom", g.zoom},
                   {"gap", g.gap},
                   {"display_window", "[0, reference max]"}};
  auto sidecar = png_file;
  sidecar.replace_extension(".json");
  std::ofstream out(sidecar);
  if (!out) throw IoError("cannot write " + sidecar.string());
  out << j.dump(2) << '\n';
}

void write_grouped_csv(const std::vector<MetricRecord>& grid, const fs::path& file) {
  std::set<CountLevel> levels;
  for (const auto& r : grid) levels.insert(r.level);
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  out << "level_label,original_PSNR,denoised_PSNR,original_SSIM,denoised_SSIM\n";
  for (const auto& level : levels) {
    out << level.label() << ',' << fixed(find_record(grid, level, "original", "PSNR").value, 6)
        << ',' << fixed(find_record(grid, level, "denoised", "PSNR").value, 6) << ','
        << fixed(find_record(grid, level, "original", "SSIM").value, 6) << ','
        << fixed(find_record(grid, level, "denoised", "SSIM").value, 6) << '\n';
  }
}

std::string comparison_table(const std::vector<MetricRecord>& comparison, double best_sigma) {
  if (comparison.empty()) throw ConfigError("comparison has no records");
  const CountLevel level = comparison.front().level;
  std::ostringstream os;
  os << "## " << level.label() << " -> full comparison (test split, n = "
     << comparison.front().n_slices << ")\n\n";
  os << "| method | PSNR (dB) | SSIM |\n|---|---|---|\n";
  for (const char* condition : {"original", "gaussian", "plain-unet", "proposed"}) {
    bool present = false;
    for (const auto& r : comparison) present = present || r.condition == condition;
    if (!present) continue;
    std::string name = condition;
    if (name == "gaussian") name += " (sigma = " + fixed(best_sigma, 2) + ")";
    os << "| " << name << " | " << fixed(find_record(comparison, level, condition, "PSNR").value, 3)
       << " | " << fixed(find_record(comparison, level, condition, "SSIM").value, 4) << " |\n";
  }
  os << "\nNote: the CycleGAN comparator is not implemented; it is substituted by the "
        "best-sigma Gaussian smoothing baseline. The plain U-Net shares the conditional "
        "model's backbone and is trained only on 1/100 -> full pairs.\n";
  return os.str();
}

}  // namespace petcond
