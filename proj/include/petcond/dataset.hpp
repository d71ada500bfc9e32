// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "petcond/countsim.hpp"
#include "petcond/phantom.hpp"

namespace petcond {

enum class Split { Train, Test };

std::string to_string(Split split);

struct PhantomEntry {
  std::string id;
  std::uint64_t seed = 0;
  Split split = Split::Train;
  std::filesystem::path activity;                       // relative to the manifest root
  std::map<CountLevel, std::filesystem::path> images;   // relative to the manifest root
};

/// Phantom-level ("patient-level") split plus per-level file locations.
struct DatasetManifest {
  std::filesystem::path root;
  std::vector<PhantomEntry> phantoms;
  std::vector<CountLevel> levels;
  double global_scale = 0.0;
  std::uint64_t base_seed = 0;
  std::uint64_t split_seed = 0;
  double train_fraction = 0.8;
  std::uint64_t total_expected_counts = 0;
  nlohmann::json config_snapshot = nlohmann::json::object();

  std::vector<const PhantomEntry*> entries(Split split) const;
  const PhantomEntry& entry(const std::string& id) const;

  /// Throws IoError if ids repeat, a split is empty, or any listed file is
  /// missing or fails to parse.
  void validate() const;
};

/// Shuffles ids with the seed and assigns round(fraction * n) of them (clamped so
/// both splits are nonempty) to training. Throws ConfigError for fewer than 2 ids
/// or a fraction outside (0, 1).
DatasetManifest split_dataset(const std::vector<std::string>& phantom_ids, double train_fraction,
                              std::uint64_t seed);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& file);
DatasetManifest load_manifest(const std::filesystem::path& file);

struct SimulationConfig {
  PhantomSpec phantom;  // seed is replaced per phantom
  std::size_t n_phantoms = 10;
  std::uint64_t total_expected_counts = 2'000'000;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  std::vector<CountLevel> levels = registry();

  void validate() const;
};

struct SimulatedPhantom {
  std::string id;
  std::uint64_t seed = 0;
  ActivityMap activity;
  std::map<CountLevel, CountImage> images;  // full plus every thinned level
};

std::string phantom_id(std::size_t index);

/// Phantom `index` of a simulation. Seeds: slice seed = seed XOR index; the
/// phantom geometry uses the slice seed, the full-count draw and each thinning use
/// mix_seed(slice seed, stream) with stream 0 and fnv1a(level label).
SimulatedPhantom simulate_phantom(const SimulationConfig& config, std::size_t index);

/// Writes phantoms/<id>.ptf (float64 activity), images/<id>_<level>.ptf (uint32
/// counts) and manifest.json. Refuses a non-empty directory unless `force`.
DatasetManifest simulate_dataset(const SimulationConfig& config,
                                 const std::filesystem::path& out_dir, bool force,
                                 const nlohmann::json& config_snapshot = nlohmann::json::object());

/// Normalized slices of one phantom at each requested level.
struct SliceSet {
  std::string id;
  std::map<CountLevel, ImageSlice> slices;

  const ImageSlice& at(const CountLevel& level) const;
};

/// Loads and normalizes the given split. Throws IoError if a requested level is missing.
std::vector<SliceSet> load_split(const DatasetManifest& manifest, Split split,
                                 const std::vector<CountLevel>& levels);

CountImage load_count_image(const std::filesystem::path& file, const CountLevel& level,
                            const std::string& source_id);
void save_count_image(const CountImage& image, const std::filesystem::path& file);

}  // namespace petcond
