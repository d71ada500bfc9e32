// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include "petcond/checkpoint.hpp"

#include <fstream>

#include "petcond/errors.hpp"
#include "petcond/ptf.hpp"

namespace fs = std::filesystem;

namespace petcond {
namespace {

constexpr const char* kFormat = "petcond-checkpoint-1";

// Parameter names use dots only, so they are valid file names as-is.
void save_set(const ParameterSet<float>& set, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& e : set.entries) ptf::write(dir / (e.name + ".ptf"), e.value);
}

ParameterSet<float> load_set(const std::vector<std::string>& names, const fs::path& dir) {
  ParameterSet<float> set;
  for (const auto& name : names) set.entries.push_back({name, ptf::read_as<float>(dir / (name + ".ptf"))});
  return set;
}

}  // namespace

TrainState Checkpoint::to_state() const {
  TrainState s;
  s.params = params;
  s.optimizer = optimizer;
  if (s.optimizer.m.size() != params.size()) s.optimizer = make_optimizer_state(params);
  s.rng = rng_state.empty() ? Rng() : load_rng(rng_state);
  s.order = order;
  s.cursor = cursor;
  s.step = step;
  return s;
}

const ParameterSet<float>& Checkpoint::inference_params() const {
  return optimizer.ema.size() == params.size() ? optimizer.ema : params;
}

Checkpoint make_checkpoint(const TrainState& state, const ModelConfig& model,
                           const TrainConfig& train, double global_scale,
                           const EmbeddingTable* table, const PairPolicy& policy,
                           const std::string& kind, const nlohmann::json& snapshot) {
  Checkpoint ck;
  ck.kind = kind;
  ck.model = model;
  ck.train = train;
  ck.params = state.params;
  ck.optimizer = state.optimizer;
  ck.rng_state = save_rng(state.rng);
  ck.order = state.order;
  ck.cursor = state.cursor;
  ck.step = state.step;
  ck.global_scale = global_scale;
  if (table) ck.embeddings = *table;
  for (const auto& p : policy.pairs()) ck.pairs.push_back(pair_label(p));
  ck.config_snapshot = snapshot;
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json j;
  j["format"] = kFormat;
  j["kind"] = ck.kind;
  j["model"] = ck.model;
  j["train"] = ck.train;
  j["global_scale"] = ck.global_scale;
  j["step"] = ck.step;
  j["optimizer_step"] = ck.optimizer.step;
  j["rng_state"] = ck.rng_state;
  j["order"] = ck.order;
  j["cursor"] = ck.cursor;
  j["pairs"] = ck.pairs;
  j["config"] = ck.config_snapshot;
  auto& names = j["parameters"] = nlohmann::json::array();
  for (const auto& e : ck.params.entries) names.push_back(e.name);
  j["embedder"] = ck.embeddings.backend;

  save_set(ck.params, dir / "params");
  const bool has_moments = ck.optimizer.m.size() == ck.params.size();
  j["has_optimizer_state"] = has_moments;
  if (has_moments) {
    save_set(ck.optimizer.m, dir / "adam_m");
    save_set(ck.optimizer.v, dir / "adam_v");
  }
  const bool has_ema = ck.optimizer.ema.size() == ck.params.size();
  j["has_ema"] = has_ema;
  if (has_ema) save_set(ck.optimizer.ema, dir / "ema");
  if (!ck.embeddings.entries.empty()) save_table(ck.embeddings, dir / "embeddings");

  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write checkpoint manifest in " + dir.string());
  out << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("no checkpoint manifest in " + dir.string());
  Checkpoint ck;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.value("format", std::string()) != kFormat)
      throw IoError(dir.string() + ": not a petcond checkpoint");
    ck.kind = j.at("kind").get<std::string>();
    ck.model = j.at("model").get<ModelConfig>();
    ck.train = j.at("train").get<TrainConfig>();
    ck.global_scale = j.at("global_scale").get<double>();
    ck.step = j.at("step").get<std::uint64_t>();
    ck.rng_state = j.at("rng_state").get<std::string>();
    ck.order = j.at("order").get<std::vector<std::size_t>>();
    ck.cursor = j.at("cursor").get<std::size_t>();
    ck.pairs = j.value("pairs", std::vector<std::string>{});
    ck.config_snapshot = j.value("config", nlohmann::json::object());
    const auto names = j.at("parameters").get<std::vector<std::string>>();
    ck.params = load_set(names, dir / "params");
    if (j.value("has_optimizer_state", false)) {
      ck.optimizer.m = load_set(names, dir / "adam_m");
      ck.optimizer.v = load_set(names, dir / "adam_v");
    }
    if (j.value("has_ema", false)) ck.optimizer.ema = load_set(names, dir / "ema");
    ck.optimizer.step = j.value("optimizer_step", std::uint64_t{0});
    if (fs::exists(dir / "embeddings" / "manifest.json"))
      ck.embeddings = load_table(dir / "embeddings");
  } catch (const nlohmann::json::exception& e) {
    throw IoError(dir.string() + ": " + e.what());
  }

  // The stored tensors must match the layout the config implies.
  const auto specs = parameter_specs(ck.model);
  if (specs.size() != ck.params.size())
    throw IoError(dir.string() + ": parameter count does not match model config");
  for (std::size_t i = 0; i < specs.size(); ++i)
    if (specs[i].name != ck.params.entries[i].name || specs[i].shape != ck.params[i].shape)
      throw IoError(dir.string() + ": parameter '" + ck.params.entries[i].name +
                    "' does not match model config");
  return ck;
}

}  // namespace petcond
