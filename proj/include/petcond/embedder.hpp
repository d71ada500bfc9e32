// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "petcond/countsim.hpp"

namespace petcond {

/// Environment variable naming an exported CLIP text-embedding directory.
inline constexpr const char* kClipWeightsEnv = "PETCOND_CLIP_WEIGHTS";

inline constexpr std::size_t kDefaultEmbeddingDim = 512;

struct PromptTemplate {
  std::string pattern = "a {level} count level PET image";

  /// Throws ConfigError unless the pattern holds exactly one "{level}".
  void validate() const;
};

/// "a 1/100 count level PET image", "a full count level PET image", ...
std::string prompt_for(const CountLevel& level, const PromptTemplate& tmpl = {});

struct ConditionEmbedding {
  std::vector<double> vector;
  std::string source;
  std::string prompt;

  bool operator==(const ConditionEmbedding&) const = default;
};

/// Maps prompts to unit-norm vectors. Implementations are immutable after
/// construction, so embed() may be called concurrently.
class EmbedderBackend {
 public:
  virtual ~EmbedderBackend() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t dim() const = 0;
  virtual ConditionEmbedding embed(std::string_view prompt) const = 0;
  /// JSON description sufficient to reconstruct the backend via make_embedder().
  virtual nlohmann::json descriptor() const = 0;
};

/// Seeded standard-normal vector keyed by (seed, prompt bytes), L2-normalized.
class FallbackEmbedder final : public EmbedderBackend {
 public:
  explicit FallbackEmbedder(std::uint64_t seed = 0, std::size_t dim = kDefaultEmbeddingDim);

  std::string kind() const override { return "deterministic-fallback"; }
  std::size_t dim() const override { return dim_; }
  ConditionEmbedding embed(std::string_view prompt) const override;
  nlohmann::json descriptor() const override;

 private:
  std::uint64_t seed_;
  std::size_t dim_;
};

// Adapter over CLIP ViT-B/32 text embeddings exported offline by
// tools/export_clip_embeddings.py. The export directory holds clip_manifest.json
// plus one PTF vector per prompt; the vectors are the projected end-of-sequence
// token features ("text_embeds"). Tokenization and the transformer itself live
// in the exporter.
class ClipTextEmbedder final : public EmbedderBackend {
 public:
  /// Throws IoError when the export directory or its manifest is missing.
  explicit ClipTextEmbedder(const std::filesystem::path& export_dir);

  std::string kind() const override { return "pretrained-clip-text"; }
  std::size_t dim() const override { return dim_; }
  /// Throws LookupError for prompts that were not exported.
  ConditionEmbedding embed(std::string_view prompt) const override;
  nlohmann::json descriptor() const override;

 private:
  std::filesystem::path dir_;
  std::string model_id_;
  std::size_t dim_ = 0;
  std::map<std::string, std::vector<double>, std::less<>> vectors_;
};

/// Builds a backend from a descriptor ({"kind": ..., ...}). A CLIP descriptor with an
/// empty "weights_path" falls back to $PETCOND_CLIP_WEIGHTS, never to the fallback kind.
std::unique_ptr<EmbedderBackend> make_embedder(const nlohmann::json& descriptor);

struct EmbeddingTable {
  std::map<CountLevel, ConditionEmbedding> entries;
  nlohmann::json backend;
  std::size_t dim = 0;

  /// Throws LookupError if the level is absent.
  const ConditionEmbedding& at(const CountLevel& level) const;
  bool contains(const CountLevel& level) const { return entries.count(level) != 0; }

  bool operator==(const EmbeddingTable&) const = default;
};

/// Throws ConfigError on an empty list or duplicate levels.
EmbeddingTable embedding_table(const EmbedderBackend& backend, std::span<const CountLevel> levels,
                               const PromptTemplate& tmpl = {});

/// Writes manifest.json plus one float64 PTF vector per level into `dir`.
void save_table(const EmbeddingTable& table, const std::filesystem::path& dir);
EmbeddingTable load_table(const std::filesystem::path& dir);

}  // namespace petcond
