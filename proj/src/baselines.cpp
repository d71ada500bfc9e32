// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include "petcond/baselines.hpp"

#include <cmath>
#include <limits>

#include "petcond/condunet.hpp"
#include "petcond/errors.hpp"

namespace petcond {
namespace {

std::size_t reflect(std::ptrdiff_t i, std::ptrdiff_t n) {
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
  return static_cast<std::size_t>(i);
}

}  // namespace

std::vector<double> gaussian_kernel(double sigma) {
  if (sigma < 0.0 || !std::isfinite(sigma)) throw ConfigError("Gaussian sigma must be >= 0");
  if (sigma == 0.0) return {1.0};
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& t : taps) t /= sum;
  return taps;
}

ImageSlice gaussian_denoise(const ImageSlice& slice, double sigma) {
  const auto taps = gaussian_kernel(sigma);
  if (taps.size() == 1) return slice;
  const auto radius = static_cast<std::ptrdiff_t>(taps.size() / 2);
  const auto h = static_cast<std::ptrdiff_t>(slice.height);
  const auto w = static_cast<std::ptrdiff_t>(slice.width);

  std::vector<double> rows(slice.intensity.size());
  for (std::ptrdiff_t r = 0; r < h; ++r)
    for (std::ptrdiff_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (std::ptrdiff_t t = -radius; t <= radius; ++t)
        acc += taps[static_cast<std::size_t>(t + radius)] *
               slice.intensity[static_cast<std::size_t>(r * w) + reflect(c + t, w)];
      rows[static_cast<std::size_t>(r * w + c)] = acc;
    }
  ImageSlice out = slice;
  for (std::ptrdiff_t r = 0; r < h; ++r)
    for (std::ptrdiff_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (std::ptrdiff_t t = -radius; t <= radius; ++t)
        acc += taps[static_cast<std::size_t>(t + radius)] *
               rows[reflect(r + t, h) * static_cast<std::size_t>(w) + static_cast<std::size_t>(c)];
      out.intensity[static_cast<std::size_t>(r * w + c)] = acc;
    }
  return out;
}

Checkpoint train_plain_unet(const DatasetManifest& manifest, const ModelConfig& model_config,
                            const TrainConfig& train_config, const TrainOptions& options) {
  ModelConfig plain = model_config;
  plain.gated = false;
  TrainOptions opts = options;
  opts.kind = "plain-unet";
  const auto policy = PairPolicy::fixed(CountLevel::fraction(1, 100), CountLevel::full());
  return train_with_policy(manifest, plain, train_config, policy, nullptr, opts);
}

ImageSlice apply_checkpoint(const Checkpoint& checkpoint, const ImageSlice& slice,
                            const CountLevel& level_in, const CountLevel& level_out) {
  if (checkpoint.model.gated)
    return denoise(checkpoint.inference_params(), checkpoint.model, slice, level_in, level_out,
                   checkpoint.embeddings);
  if (!(level_in < level_out))
    throw ConstraintError("output count level " + level_out.label() +
                          " must be higher than input level " + level_in.label());
  return denoise_plain(checkpoint.inference_params(), checkpoint.model, slice, level_out);
}

Comparison compare_methods(const std::vector<SliceSet>& test_slices, const CountLevel& level,
                           const Checkpoint& proposed, const Checkpoint* plain,
                           const std::vector<double>& sigmas) {
  if (test_slices.empty()) throw ConfigError("comparison needs test slices");
  if (sigmas.empty()) throw ConfigError("Gaussian sigma sweep is empty");
  const CountLevel full = CountLevel::full();
  const auto n = static_cast<double>(test_slices.size());

  auto mean_scores = [&](auto&& produce) {
    double p = 0.0;
    double s = 0.0;
    for (const auto& set : test_slices) {
      const auto scores = score_slice(produce(set), set.at(full));
      p += scores.psnr;
      s += scores.ssim;
    }
    return std::pair{p / n, s / n};
  };

  Comparison cmp;
  cmp.level = level;
  auto add = [&](const std::string& condition, std::pair<double, double> scores) {
    cmp.records.push_back({level, condition, "PSNR", scores.first, test_slices.size()});
    cmp.records.push_back({level, condition, "SSIM", scores.second, test_slices.size()});
  };

  add("original", mean_scores([&](const SliceSet& s) { return s.at(level); }));

  std::pair<double, double> best{-std::numeric_limits<double>::infinity(), 0.0};
  for (double sigma : sigmas) {
    const auto scores =
        mean_scores([&](const SliceSet& s) { return gaussian_denoise(s.at(level), sigma); });
    if (scores.first > best.first) {
      best = scores;
      cmp.best_sigma = sigma;
    }
  }
  add("gaussian", best);

  if (plain)
    add("plain-unet", mean_scores([&](const SliceSet& s) {
          return apply_checkpoint(*plain, s.at(level), level, full);
        }));
  add("proposed", mean_scores([&](const SliceSet& s) {
        return apply_checkpoint(proposed, s.at(level), level, full);
      }));
  return cmp;
}

}  // namespace petcond
