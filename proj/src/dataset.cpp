// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include "petcond/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "petcond/errors.hpp"
#include "petcond/ptf.hpp"
#include "petcond/rng.hpp"

namespace fs = std::filesystem;

namespace petcond {

std::string to_string(Split split) { return split == Split::Train ? "train" : "test"; }

namespace {

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  throw IoError("unknown split '" + s + "' in manifest");
}

}  // namespace

std::vector<const PhantomEntry*> DatasetManifest::entries(Split split) const {
  std::vector<const PhantomEntry*> out;
  for (const auto& p : phantoms)
    if (p.split == split) out.push_back(&p);
  return out;
}

const PhantomEntry& DatasetManifest::entry(const std::string& id) const {
  for (const auto& p : phantoms)
    if (p.id == id) return p;
  throw LookupError("phantom '" + id + "' not in manifest");
}

void DatasetManifest::validate() const {
  std::set<std::string> seen;
  for (const auto& p : phantoms) {
    if (!seen.insert(p.id).second) throw IoError("phantom id '" + p.id + "' listed twice");
    if (!p.activity.empty()) ptf::read_as<double>(root / p.activity);
    for (const auto& level : levels) {
      const auto it = p.images.find(level);
      if (it == p.images.end())
        throw IoError("phantom '" + p.id + "' has no image at level " + level.label());
      ptf::read_as<std::uint32_t>(root / it->second);
    }
  }
  if (entries(Split::Train).empty() || entries(Split::Test).empty())
    throw IoError("manifest must have nonempty train and test splits");
}

DatasetManifest split_dataset(const std::vector<std::string>& phantom_ids, double train_fraction,
                              std::uint64_t seed) {
  if (phantom_ids.size() < 2) throw ConfigError("splitting needs at least 2 phantom ids");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie in (0, 1)");
  const auto n = phantom_ids.size();
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n))), 1, n - 1);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_train(n, false);
  for (std::size_t i = 0; i < n_train; ++i) is_train[order[i]] = true;

  DatasetManifest m;
  m.split_seed = seed;
  m.train_fraction = train_fraction;
  for (std::size_t i = 0; i < n; ++i) {
    PhantomEntry e;
    e.id = phantom_ids[i];
    e.split = is_train[i] ? Split::Train : Split::Test;
    m.phantoms.push_back(std::move(e));
  }
  return m;
}

void save_manifest(const DatasetManifest& m, const fs::path& file) {
  nlohmann::json j;
  j["format"] = "petcond-dataset-1";
  j["global_scale"] = m.global_scale;
  j["base_seed"] = m.base_seed;
  j["split_seed"] = m.split_seed;
  j["train_fraction"] = m.train_fraction;
  j["total_expected_counts"] = m.total_expected_counts;
  auto& levels = j["levels"] = nlohmann::json::array();
  for (const auto& l : m.levels) levels.push_back(l.label());
  auto& phantoms = j["phantoms"] = nlohmann::json::array();
  for (const auto& p : m.phantoms) {
    nlohmann::json e{{"id", p.id},
                     {"seed", p.seed},
                     {"split", to_string(p.split)},
                     {"activity", p.activity.generic_string()}};
    auto& images = e["images"] = nlohmann::json::object();
    for (const auto& [level, path] : p.images) images[level.label()] = path.generic_string();
    phantoms.push_back(std::move(e));
  }
  j["config"] = m.config_snapshot;
  std::ofstream out(file);
  if (!out) throw IoError("cannot write manifest " + file.string());
  out << j.dump(2) << '\n';
}

DatasetManifest load_manifest(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open manifest " + file.string());
  DatasetManifest m;
  m.root = file.parent_path();
  try {
    const auto j = nlohmann::json::parse(in);
    m.global_scale = j.at("global_scale").get<double>();
    m.base_seed = j.at("base_seed").get<std::uint64_t>();
    m.split_seed = j.at("split_seed").get<std::uint64_t>();
    m.train_fraction = j.at("train_fraction").get<double>();
    m.total_expected_counts = j.value("total_expected_counts", std::uint64_t{0});
    for (const auto& l : j.at("levels")) m.levels.push_back(CountLevel::parse(l.get<std::string>()));
    for (const auto& e : j.at("phantoms")) {
      PhantomEntry p;
      p.id = e.at("id").get<std::string>();
      p.seed = e.at("seed").get<std::uint64_t>();
      p.split = parse_split(e.at("split").get<std::string>());
      p.activity = e.value("activity", std::string());
      for (const auto& [label, path] : e.at("images").items())
        p.images.emplace(CountLevel::parse(label), path.get<std::string>());
      m.phantoms.push_back(std::move(p));
    }
    m.config_snapshot = j.value("config", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(file.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw IoError(file.string() + ": " + e.what());
  }
  return m;
}

void SimulationConfig::validate() const {
  phantom.validate();
  if (n_phantoms < 2) throw ConfigError("simulation needs at least 2 phantoms");
  if (levels.empty() || !levels.back().is_full())
    throw ConfigError("simulation levels must include the full count");
  if (!std::is_sorted(levels.begin(), levels.end()) ||
      std::adjacent_find(levels.begin(), levels.end()) != levels.end())
    throw ConfigError("simulation levels must be strictly increasing");
}

std::string phantom_id(std::size_t index) {
  std::ostringstream os;
  os << "phantom_" << std::setw(4) << std::setfill('0') << index;
  return os.str();
}

SimulatedPhantom simulate_phantom(const SimulationConfig& config, std::size_t index) {
  SimulatedPhantom out;
  out.id = phantom_id(index);
  out.seed = slice_seed(config.seed, index);
  PhantomSpec spec = config.phantom;
  spec.seed = out.seed;
  out.activity = generate_phantom(spec);
  CountImage full =
      synthesize_full_count(out.activity, config.total_expected_counts, mix_seed(out.seed, 0));
  full.source_id = out.id;
  for (const auto& level : config.levels) {
    if (level.is_full()) continue;
    out.images.emplace(level, thin(full, level, mix_seed(out.seed, fnv1a(level.label()))));
  }
  out.images.emplace(CountLevel::full(), std::move(full));
  return out;
}

void save_count_image(const CountImage& image, const fs::path& file) {
  ptf::write(file, Tensor<std::uint32_t>({image.height, image.width}, image.counts));
}

CountImage load_count_image(const fs::path& file, const CountLevel& level,
                            const std::string& source_id) {
  auto t = ptf::read_as<std::uint32_t>(file);
  if (t.shape.size() != 2) throw IoError(file.string() + ": count image must be 2-D");
  CountImage img;
  img.height = t.shape[0];
  img.width = t.shape[1];
  img.counts.assign(t.data.begin(), t.data.end());
  img.level = level;
  img.source_id = source_id;
  return img;
}

DatasetManifest simulate_dataset(const SimulationConfig& config, const fs::path& out_dir,
                                 bool force, const nlohmann::json& config_snapshot) {
  config.validate();
  if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
    if (!force)
      throw IoError("output directory " + out_dir.string() +
                    " is not empty (pass --force to overwrite)");
    fs::remove_all(out_dir);
  }
  fs::create_directories(out_dir / "phantoms");
  fs::create_directories(out_dir / "images");

  std::vector<std::string> ids;
  for (std::size_t i = 0; i < config.n_phantoms; ++i) ids.push_back(phantom_id(i));
  DatasetManifest m = split_dataset(ids, config.train_fraction, config.seed);
  m.root = out_dir;
  m.levels = config.levels;
  m.base_seed = config.seed;
  m.total_expected_counts = config.total_expected_counts;
  m.config_snapshot = config_snapshot;

  std::vector<CountImage> train_full;
  for (std::size_t i = 0; i < config.n_phantoms; ++i) {
    const auto sim = simulate_phantom(config, i);
    PhantomEntry& e = m.phantoms[i];
    e.seed = sim.seed;
    e.activity = fs::path("phantoms") / (sim.id + ".ptf");
    ptf::write(out_dir / e.activity,
               Tensor<double>({sim.activity.size, sim.activity.size}, sim.activity.values));
    for (const auto& [level, img] : sim.images) {
      const auto rel = fs::path("images") / (sim.id + "_" + level.file_tag() + ".ptf");
      save_count_image(img, out_dir / rel);
      e.images.emplace(level, rel);
    }
    if (e.split == Split::Train) train_full.push_back(sim.images.at(CountLevel::full()));
  }
  m.global_scale = compute_global_scale(train_full);
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

const ImageSlice& SliceSet::at(const CountLevel& level) const {
  const auto it = slices.find(level);
  if (it == slices.end())
    throw LookupError("slice set '" + id + "' has no level " + level.label());
  return it->second;
}

std::vector<SliceSet> load_split(const DatasetManifest& manifest, Split split,
                                 const std::vector<CountLevel>& levels) {
  if (!(manifest.global_scale > 0.0)) throw IoError("manifest has no valid global_scale");
  std::vector<SliceSet> out;
  for (const PhantomEntry* e : manifest.entries(split)) {
    SliceSet set;
    set.id = e->id;
    for (const auto& level : levels) {
      const auto it = e->images.find(level);
      if (it == e->images.end())
        throw IoError("phantom '" + e->id + "' has no image at level " + level.label());
      set.slices.emplace(level, normalize(load_count_image(manifest.root / it->second, level, e->id),
                                          manifest.global_scale));
    }
    out.push_back(std::move(set));
  }
  return out;
}

}  // namespace petcond
