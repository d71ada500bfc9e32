// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include "petcond/config.hpp"

#include <fstream>

#include "petcond/baselines.hpp"
#include "petcond/errors.hpp"

namespace fs = std::filesystem;

namespace petcond {
namespace {

std::vector<std::string> labels(const std::vector<CountLevel>& levels) {
  std::vector<std::string> out;
  for (const auto& l : levels) out.push_back(l.label());
  return out;
}

std::vector<CountLevel> parse_levels(const nlohmann::json& j) {
  std::vector<CountLevel> out;
  for (const auto& l : j) out.push_back(CountLevel::parse(l.get<std::string>()));
  return out;
}

Range parse_range(const nlohmann::json& j, const char* key) {
  const auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != 2) throw ConfigError(std::string("phantom.") + key + " must be [low, high]");
  return {v[0], v[1]};
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

nlohmann::json default_run_config_json() {
  const PhantomSpec phantom;
  const SimulationConfig sim;
  const ModelConfig model;
  const TrainConfig train;
  const PromptTemplate prompt;
  nlohmann::json j;
  j["phantom"] = {
      {"size", phantom.size},
      {"n_background_ellipses", phantom.n_background_ellipses},
      {"n_lesions", phantom.n_lesions},
      {"background_intensity_range", {phantom.background_intensity.low, phantom.background_intensity.high}},
      {"lesion_intensity_range", {phantom.lesion_intensity.low, phantom.lesion_intensity.high}},
      {"lesion_radius_range", {phantom.lesion_radius.low, phantom.lesion_radius.high}}};
  j["simulate"] = {{"n_phantoms", 48},
                   {"total_expected_counts", sim.total_expected_counts},
                   {"seed", sim.seed},
                   {"train_fraction", sim.train_fraction},
                   {"levels", labels(sim.levels)},
                   {"output_dir", "runs/data"}};
  j["embedder"] = {{"kind", "deterministic-fallback"},
                   {"seed", 0},
                   {"dim", kDefaultEmbeddingDim},
                   {"weights_path", ""},
                   {"template", prompt.pattern}};
  nlohmann::json m = model;
  m.erase("gated");
  m["base_channels"] = 16;  // desk scale: wider backbones are undertrained at ~2000 steps
  j["model"] = m;
  nlohmann::json t = train;
  t["output_dir"] = "runs/train";
  j["train"] = t;
  std::vector<CountLevel> low = registry();
  low.pop_back();
  j["evaluate"] = {{"checkpoint", ""},
                   {"plain_checkpoint", ""},
                   {"output_dir", "runs/eval"},
                   {"levels", labels(low)},
                   {"gaussian_sigmas", default_gaussian_sigmas()},
                   {"comparison_level", "1/100"}};
  j["report"] = {{"output_dir", "runs/report"}};
  return j;
}

RunConfig parse_run_config(const nlohmann::json& user, const fs::path& base_dir,
                           std::optional<std::uint64_t> seed_override) {
  if (!user.is_object()) throw ConfigError("run config must be a JSON object");
  nlohmann::json merged = default_run_config_json();
  for (const auto& [section, values] : user.items()) {
    if (!merged.contains(section)) throw ConfigError("unknown config section '" + section + "'");
    if (!values.is_object()) throw ConfigError("config section '" + section + "' must be an object");
    for (const auto& [key, value] : values.items()) {
      if (!merged[section].contains(key))
        throw ConfigError("unknown config key '" + section + "." + key + "'");
      merged[section][key] = value;
    }
  }
  if (seed_override) {
    merged["simulate"]["seed"] = *seed_override;
    merged["train"]["seed"] = *seed_override;
  }

  RunConfig rc;
  try {
    const auto& ph = merged.at("phantom");
    PhantomSpec& spec = rc.simulation.phantom;
    spec.size = ph.at("size").get<std::size_t>();
    spec.n_background_ellipses = ph.at("n_background_ellipses").get<std::size_t>();
    spec.n_lesions = ph.at("n_lesions").get<std::size_t>();
    spec.background_intensity = parse_range(ph, "background_intensity_range");
    spec.lesion_intensity = parse_range(ph, "lesion_intensity_range");
    spec.lesion_radius = parse_range(ph, "lesion_radius_range");

    const auto& sim = merged.at("simulate");
    rc.simulation.n_phantoms = sim.at("n_phantoms").get<std::size_t>();
    rc.simulation.total_expected_counts = sim.at("total_expected_counts").get<std::uint64_t>();
    rc.simulation.seed = sim.at("seed").get<std::uint64_t>();
    rc.simulation.train_fraction = sim.at("train_fraction").get<double>();
    rc.simulation.levels = parse_levels(sim.at("levels"));
    rc.data_dir = resolve(base_dir, sim.at("output_dir").get<std::string>());
    rc.simulation.validate();

    const auto& emb = merged.at("embedder");
    rc.embedder = {{"kind", emb.at("kind").get<std::string>()},
                   {"seed", emb.at("seed").get<std::uint64_t>()},
                   {"dim", emb.at("dim").get<std::size_t>()},
                   {"weights_path", emb.at("weights_path").get<std::string>().empty()
                                        ? std::string()
                                        : resolve(base_dir, emb.at("weights_path").get<std::string>()).string()}};
    rc.prompt.pattern = emb.at("template").get<std::string>();
    rc.prompt.validate();

    rc.model = merged.at("model").get<ModelConfig>();
    rc.model.gated = true;
    if (rc.model.embedding_dim != rc.embedder.at("dim").get<std::size_t>())
      throw ConfigError("model.embedding_dim must equal embedder.dim");
    rc.model.validate();

    auto train_json = merged.at("train");
    rc.train_dir = resolve(base_dir, train_json.at("output_dir").get<std::string>());
    train_json.erase("output_dir");
    rc.train = train_json.get<TrainConfig>();
    rc.train.validate();

    const auto& ev = merged.at("evaluate");
    const auto ck = ev.at("checkpoint").get<std::string>();
    const auto plain = ev.at("plain_checkpoint").get<std::string>();
    rc.evaluate.checkpoint = ck.empty() ? rc.train_dir / "proposed" / "final" : resolve(base_dir, ck);
    rc.evaluate.plain_checkpoint =
        plain.empty() ? rc.train_dir / "plain-unet" / "final" : resolve(base_dir, plain);
    rc.evaluate.output_dir = resolve(base_dir, ev.at("output_dir").get<std::string>());
    rc.evaluate.levels = parse_levels(ev.at("levels"));
    rc.evaluate.gaussian_sigmas = ev.at("gaussian_sigmas").get<std::vector<double>>();
    rc.evaluate.comparison_level = CountLevel::parse(ev.at("comparison_level").get<std::string>());
    for (const auto& l : rc.evaluate.levels)
      if (l.is_full()) throw ConfigError("evaluate.levels must lie below the full count");
    for (double s : rc.evaluate.gaussian_sigmas)
      if (s < 0.0) throw ConfigError("evaluate.gaussian_sigmas must be nonnegative");

    rc.report.output_dir = resolve(base_dir, merged.at("report").at("output_dir").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
  rc.snapshot = merged;
  return rc;
}

RunConfig load_run_config(const fs::path& file, std::optional<std::uint64_t> seed_override) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  return parse_run_config(j, file.parent_path(), seed_override);
}

}  // namespace petcond
