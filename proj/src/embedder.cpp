// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include "petcond/embedder.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>

#include "petcond/errors.hpp"
#include "petcond/ptf.hpp"
#include "petcond/rng.hpp"

namespace petcond {
namespace {

constexpr std::string_view kPlaceholder = "{level}";

void normalize_in_place(std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw NumericError("cannot normalize a zero or non-finite embedding");
  for (double& x : v) x /= norm;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace

void PromptTemplate::validate() const {
  const auto first = pattern.find(kPlaceholder);
  if (first == std::string::npos || pattern.find(kPlaceholder, first + 1) != std::string::npos)
    throw ConfigError("prompt template must contain exactly one {level} placeholder");
}

std::string prompt_for(const CountLevel& level, const PromptTemplate& tmpl) {
  tmpl.validate();
  std::string out = tmpl.pattern;
  out.replace(out.find(kPlaceholder), kPlaceholder.size(), level.label());
  return out;
}

FallbackEmbedder::FallbackEmbedder(std::uint64_t seed, std::size_t dim) : seed_(seed), dim_(dim) {
  if (dim == 0) throw ConfigError("embedding dimension must be positive");
}

ConditionEmbedding FallbackEmbedder::embed(std::string_view prompt) const {
  if (prompt.empty()) throw ConfigError("cannot embed an empty prompt");
  Rng rng(mix_seed(seed_, fnv1a(prompt)));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim_);
  for (double& x : v) x = normal(rng);
  normalize_in_place(v);
  return {std::move(v), kind(), std::string(prompt)};
}

nlohmann::json FallbackEmbedder::descriptor() const {
  return {{"kind", kind()}, {"seed", seed_}, {"dim", dim_}};
}

ClipTextEmbedder::ClipTextEmbedder(const std::filesystem::path& export_dir) : dir_(export_dir) {
  const auto manifest_path = export_dir / "clip_manifest.json";
  if (!std::filesystem::exists(manifest_path))
    throw IoError("pretrained CLIP text embeddings not found: " + manifest_path.string());
  const auto manifest = read_json(manifest_path);
  try {
    model_id_ = manifest.at("model").get<std::string>();
    dim_ = manifest.at("dim").get<std::size_t>();
    for (const auto& entry : manifest.at("prompts")) {
      auto t = ptf::read_as<double>(export_dir / entry.at("file").get<std::string>());
      if (t.size() != dim_)
        throw IoError("CLIP export vector has dimension " + std::to_string(t.size()) +
                      ", manifest says " + std::to_string(dim_));
      std::vector<double> v(t.data.begin(), t.data.end());
      normalize_in_place(v);
      vectors_.emplace(entry.at("prompt").get<std::string>(), std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(manifest_path.string() + ": " + e.what());
  }
}

ConditionEmbedding ClipTextEmbedder::embed(std::string_view prompt) const {
  if (prompt.empty()) throw ConfigError("cannot embed an empty prompt");
  const auto it = vectors_.find(prompt);
  if (it == vectors_.end())
    throw LookupError("prompt '" + std::string(prompt) + "' missing from CLIP export " +
                      dir_.string());
  return {it->second, kind() + ":" + model_id_, std::string(prompt)};
}

nlohmann::json ClipTextEmbedder::descriptor() const {
  return {{"kind", kind()}, {"weights_path", dir_.string()}, {"model", model_id_}, {"dim", dim_}};
}

std::unique_ptr<EmbedderBackend> make_embedder(const nlohmann::json& descriptor) {
  const auto kind = descriptor.value("kind", std::string("deterministic-fallback"));
  if (kind == "deterministic-fallback" || kind == "fallback") {
    return std::make_unique<FallbackEmbedder>(descriptor.value("seed", std::uint64_t{0}),
                                              descriptor.value("dim", kDefaultEmbeddingDim));
  }
  if (kind == "pretrained-clip-text" || kind == "clip") {
    std::string path = descriptor.value("weights_path", std::string());
    if (path.empty()) {
      if (const char* env = std::getenv(kClipWeightsEnv)) path = env;
    }
    if (path.empty())
      throw IoError(std::string("pretrained CLIP backend requested but no weights path given "
                                "(set embedder.weights_path or ") +
                    kClipWeightsEnv + ")");
    return std::make_unique<ClipTextEmbedder>(path);
  }
  throw ConfigError("unknown embedder kind '" + kind + "'");
}

const ConditionEmbedding& EmbeddingTable::at(const CountLevel& level) const {
  const auto it = entries.find(level);
  if (it == entries.end())
    throw LookupError("count level " + level.label() + " missing from embedding table");
  return it->second;
}

EmbeddingTable embedding_table(const EmbedderBackend& backend, std::span<const CountLevel> levels,
                               const PromptTemplate& tmpl) {
  if (levels.empty()) throw ConfigError("embedding table needs at least one level");
  EmbeddingTable table;
  table.backend = backend.descriptor();
  table.dim = backend.dim();
  for (const auto& level : levels) {
    auto emb = backend.embed(prompt_for(level, tmpl));
    if (emb.vector.size() != table.dim)
      throw ShapeError("embedder returned a vector of the wrong dimension");
    if (!table.entries.emplace(level, std::move(emb)).second)
      throw ConfigError("duplicate count level " + level.label() + " in embedding table");
  }
  return table;
}

void save_table(const EmbeddingTable& table, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest{{"dim", table.dim}, {"backend", table.backend}};
  auto& entries = manifest["entries"] = nlohmann::json::array();
  for (const auto& [level, emb] : table.entries) {
    const std::string file = "emb_" + level.file_tag() + ".ptf";
    ptf::write(dir / file, Tensor<double>({emb.vector.size()}, emb.vector));
    entries.push_back(
        {{"level", level.label()}, {"prompt", emb.prompt}, {"source", emb.source}, {"file", file}});
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write embedding table manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

EmbeddingTable load_table(const std::filesystem::path& dir) {
  const auto manifest = read_json(dir / "manifest.json");
  EmbeddingTable table;
  try {
    table.dim = manifest.at("dim").get<std::size_t>();
    table.backend = manifest.at("backend");
    for (const auto& entry : manifest.at("entries")) {
      const auto level = CountLevel::parse(entry.at("level").get<std::string>());
      auto t = ptf::read_as<double>(dir / entry.at("file").get<std::string>());
      if (t.size() != table.dim) throw ShapeError("embedding table entry has wrong dimension");
      ConditionEmbedding emb{{t.data.begin(), t.data.end()}, entry.at("source").get<std::string>(),
                             entry.at("prompt").get<std::string>()};
      if (!table.entries.emplace(level, std::move(emb)).second)
        throw IoError("duplicate level in embedding table " + dir.string());
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError((dir / "manifest.json").string() + ": " + e.what());
  }
  return table;
}

}  // namespace petcond
