// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "petcond/condunet.hpp"
#include "petcond/embedder.hpp"
#include "petcond/trainer.hpp"

namespace petcond {

/// Checkpoint directory layout:
///   manifest.json            configs, global scale, step, rng state, tensor index
///   params/<name>.ptf        float32 model parameters
///   adam_m/<name>.ptf        optimizer first moments
///   adam_v/<name>.ptf        optimizer second moments
///   ema/<name>.ptf           parameter moving average (when enabled)
///   embeddings/              embedding table (gated models only)
struct Checkpoint {
  std::string kind = "proposed";  // "proposed" or "plain-unet"
  ModelConfig model;
  TrainConfig train;
  ParameterSet<float> params;
  OptimizerState optimizer;
  std::string rng_state;
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  std::uint64_t step = 0;
  double global_scale = 1.0;
  EmbeddingTable embeddings;
  /// Pair policy the model was trained with, as "in->out" labels.
  std::vector<std::string> pairs;
  nlohmann::json config_snapshot = nlohmann::json::object();

  TrainState to_state() const;
  /// Weights used for denoising: the moving average when present, else params.
  const ParameterSet<float>& inference_params() const;
};

Checkpoint make_checkpoint(const TrainState& state, const ModelConfig& model,
                           const TrainConfig& train, double global_scale,
                           const EmbeddingTable* table, const PairPolicy& policy,
                           const std::string& kind, const nlohmann::json& snapshot);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace petcond
