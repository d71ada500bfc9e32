// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include "petcond/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "petcond/checkpoint.hpp"
#include "petcond/condunet.hpp"
#include "petcond/errors.hpp"

namespace petcond {
namespace {

void check_same_shape(const ImageView& a, const ImageView& b) {
  if (a.height != b.height || a.width != b.width || a.data.size() != b.data.size() ||
      a.data.size() != a.height * a.width)
    throw ShapeError("image shapes differ: " + std::to_string(a.height) + "x" +
                     std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                     std::to_string(b.width));
}

// Valid-mode separable filter: out is (h - k + 1) x (w - k + 1).
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t h, std::size_t w,
                                 const std::vector<double>& taps) {
  const std::size_t k = taps.size();
  const std::size_t ow = w - k + 1;
  const std::size_t oh = h - k + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += taps[t] * img[r * w + c + t];
      rows[r * ow + c] = acc;
    }
  std::vector<double> out(oh * ow);
  for (std::size_t r = 0; r < oh; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += taps[t] * rows[(r + t) * ow + c];
      out[r * ow + c] = acc;
    }
  return out;
}

std::string format_value(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

double parse_value(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::stod(s);
}

}  // namespace

double mse(const ImageView& a, const ImageView& b) {
  check_same_shape(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.data.size());
}

double psnr(const ImageView& pred, const ImageView& ref, double data_range) {
  if (!(data_range > 0.0)) throw ConfigError("PSNR data range must be positive");
  const double err = mse(pred, ref);
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(data_range * data_range / err);
}

void SsimParams::validate() const {
  if (!(data_range > 0.0)) throw ConfigError("SSIM data range must be positive");
  if (window == 0 || window % 2 == 0) throw ConfigError("SSIM window must be odd");
  if (!(sigma > 0.0)) throw ConfigError("SSIM sigma must be positive");
}

std::vector<double> ssim_window_1d(const SsimParams& params) {
  const auto half = static_cast<double>(params.window / 2);
  std::vector<double> taps(params.window);
  double sum = 0.0;
  for (std::size_t i = 0; i < params.window; ++i) {
    const double x = static_cast<double>(i) - half;
    taps[i] = std::exp(-x * x / (2.0 * params.sigma * params.sigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

double ssim(const ImageView& a, const ImageView& b, const SsimParams& params) {
  params.validate();
  check_same_shape(a, b);
  if (a.height < params.window || a.width < params.window)
    throw ShapeError("image " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                     " is smaller than the SSIM window");
  const auto taps = ssim_window_1d(params);
  const std::size_t n = a.data.size();
  std::vector<double> x(a.data.begin(), a.data.end());
  std::vector<double> y(b.data.begin(), b.data.end());
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mu_x = filter_valid(x, a.height, a.width, taps);
  const auto mu_y = filter_valid(y, a.height, a.width, taps);
  const auto e_xx = filter_valid(xx, a.height, a.width, taps);
  const auto e_yy = filter_valid(yy, a.height, a.width, taps);
  const auto e_xy = filter_valid(xy, a.height, a.width, taps);

  const double c1 = params.c1();
  const double c2 = params.c2();
  double total = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x[i];
    const double my = mu_y[i];
    const double var_x = e_xx[i] - mx * mx;
    const double var_y = e_yy[i] - my * my;
    const double cov = e_xy[i] - mx * my;
    total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
             ((mx * mx + my * my + c1) * (var_x + var_y + c2));
  }
  return total / static_cast<double>(mu_x.size());
}

SliceScores score_slice(const ImageSlice& pred, const ImageSlice& ref) {
  const double range = *std::max_element(ref.intensity.begin(), ref.intensity.end());
  if (!(range > 0.0)) throw NumericError("reference slice has zero maximum; data range undefined");
  SsimParams params;
  params.data_range = range;
  return {psnr(pred, ref, range), ssim(pred, ref, params), range};
}

std::vector<MetricRecord> evaluate_grid(const Checkpoint& checkpoint,
                                        const std::vector<SliceSet>& test_slices,
                                        const std::vector<CountLevel>& levels) {
  if (test_slices.empty()) throw ConfigError("evaluation needs a nonempty test split");
  const CountLevel full = CountLevel::full();
  std::vector<MetricRecord> records;
  for (const auto& level : levels) {
    double sum_psnr[2] = {0.0, 0.0};
    double sum_ssim[2] = {0.0, 0.0};
    for (const auto& set : test_slices) {
      const ImageSlice& ref = set.at(full);
      const ImageSlice& original = set.at(level);
      const ImageSlice restored = denoise(checkpoint.inference_params(), checkpoint.model, original, level,
                                          full, checkpoint.embeddings);
      const auto so = score_slice(original, ref);
      const auto sd = score_slice(restored, ref);
      sum_psnr[0] += so.psnr;
      sum_ssim[0] += so.ssim;
      sum_psnr[1] += sd.psnr;
      sum_ssim[1] += sd.ssim;
    }
    const auto n = static_cast<double>(test_slices.size());
    const char* conditions[2] = {"original", "denoised"};
    for (int c = 0; c < 2; ++c) {
      records.push_back({level, conditions[c], "PSNR", sum_psnr[c] / n, test_slices.size()});
      records.push_back({level, conditions[c], "SSIM", sum_ssim[c] / n, test_slices.size()});
    }
  }
  return records;
}

std::vector<MetricRecord> evaluate_grid(const Checkpoint& checkpoint,
                                        const DatasetManifest& manifest,
                                        const std::vector<CountLevel>& levels) {
  const auto test = manifest.entries(Split::Test);
  if (test.empty()) throw ConfigError("manifest has an empty test split");
  for (const PhantomEntry* e : test)
    if (!e->images.count(CountLevel::full()))
      throw IoError("test phantom '" + e->id + "' has no full-count reference");
  std::vector<CountLevel> needed = levels;
  needed.push_back(CountLevel::full());
  std::sort(needed.begin(), needed.end());
  needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
  return evaluate_grid(checkpoint, load_split(manifest, Split::Test, needed), levels);
}

void write_metric_csv(const std::vector<MetricRecord>& records, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  out << "level_label,condition,metric,value,n_slices,data_range_policy\n";
  for (const auto& r : records)
    out << r.level.label() << ',' << r.condition << ',' << r.metric << ',' << format_value(r.value)
        << ',' << r.n_slices << ',' << r.data_range_policy << '\n';
  if (!out) throw IoError("failed writing " + file.string());
}

std::vector<MetricRecord> read_metric_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line) ||
      line != "level_label,condition,metric,value,n_slices,data_range_policy")
    throw IoError(file.string() + ": unexpected metric CSV header");
  std::vector<MetricRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 6)
      throw IoError(file.string() + ":" + std::to_string(line_no) + ": expected 6 fields");
    try {
      records.push_back({CountLevel::parse(fields[0]), fields[1], fields[2],
                         parse_value(fields[3]), std::stoul(fields[4]), fields[5]});
    } catch (const std::exception& e) {
      throw IoError(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

const MetricRecord& find_record(const std::vector<MetricRecord>& records, const CountLevel& level,
                                const std::string& condition, const std::string& metric) {
  for (const auto& r : records)
    if (r.level == level && r.condition == condition && r.metric == metric) return r;
  throw LookupError("no " + metric + " record for " + condition + " at " + level.label());
}

}  // namespace petcond
