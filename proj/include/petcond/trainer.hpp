// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "petcond/condunet.hpp"
#include "petcond/countsim.hpp"
#include "petcond/dataset.hpp"
#include "petcond/embedder.hpp"
#include "petcond/rng.hpp"

namespace petcond {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  bool operator==(const AdamWConfig&) const = default;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 8;
  std::size_t steps = 2000;
  AdamWConfig adamw;
  std::uint64_t seed = 0;
  std::vector<CountLevel> levels = registry();
  /// Random flips / quarter turns applied identically to input and target.
  bool augment = true;
  /// 0 disables periodic checkpoints.
  std::size_t checkpoint_every = 0;
  /// Decay of the parameter moving average used for inference; 0 disables it.
  double ema_decay = 0.999;
  /// Exponent of the per-pair noise weighting (see pair_loss_weights); 0 is plain MSE.
  double noise_weight_power = 0.25;
  /// Draws a level pair for every batch element instead of one per batch.
  bool pair_per_sample = true;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

using LevelPair = std::pair<CountLevel, CountLevel>;

std::string pair_label(const LevelPair& pair);

/// Eligible (input, output) level pairs, input strictly below output, sampled uniformly.
class PairPolicy {
 public:
  /// Every ordered pair of distinct levels with input < output.
  static PairPolicy all_pairs(std::span<const CountLevel> levels);
  /// A single fixed pair (baseline parity mode). Throws ConstraintError unless in < out.
  static PairPolicy fixed(const CountLevel& in, const CountLevel& out);

  const std::vector<LevelPair>& pairs() const { return pairs_; }
  std::vector<CountLevel> levels() const;

 private:
  std::vector<LevelPair> pairs_;
};

/// Throws ConfigError on an empty policy.
std::size_t sample_pair_index(const PairPolicy& policy, Rng& rng);
LevelPair sample_pair(const PairPolicy& policy, Rng& rng);

/// Per-pair loss weights, one per policy pair, with mean 1. A pair is weighted by
/// (1/p_in - 1/p_out)^-power; 1/p_in - 1/p_out is the input-target noise variance of
/// thinned, duration-corrected counts relative to the full-count mean, so power 1 gives
/// every pair a comparable gradient and power 0 is unweighted MSE.
std::vector<double> pair_loss_weights(const PairPolicy& policy, double power);

struct OptimizerState {
  ParameterSet<float> m;
  ParameterSet<float> v;
  std::uint64_t step = 0;
  /// Moving average of the parameters (empty when disabled).
  ParameterSet<float> ema;
};

OptimizerState make_optimizer_state(const ParameterSet<float>& params);

struct StepResult {
  double loss = 0.0;
  double grad_norm = 0.0;
};

/// One MSE + AdamW step, followed by the moving-average update when enabled.
/// `sample_weights` scales each batch element's loss term: empty means 1, a single
/// value applies to the whole batch, otherwise one value per element. Throws NumericError (step, loss, gradient norm) when the
/// loss or gradient is not finite; parameters are left untouched in that case.
StepResult train_step(const ConditionalUNet<float>& net, ParameterSet<float>& params,
                      OptimizerState& optimizer, const TrainConfig& config,
                      const Tensor<float>& inputs, const Tensor<float>& targets,
                      const Tensor<float>& emb_in, const Tensor<float>& emb_out,
                      std::span<const double> sample_weights = {});

/// Mean squared error between two equally shaped tensors, accumulated in double.
double mse_loss(const Tensor<float>& prediction, const Tensor<float>& target);

struct StepRecord {
  std::uint64_t step = 0;
  std::string pair;
  double loss = 0.0;
  double wall_seconds = 0.0;
};

/// Everything needed to continue a run bit-exactly.
struct TrainState {
  ParameterSet<float> params;
  OptimizerState optimizer;
  Rng rng;
  std::vector<std::size_t> order;  // current epoch permutation of training slices
  std::size_t cursor = 0;          // next position in `order`
  std::uint64_t step = 0;
};

struct Checkpoint;

/// Training loop: per step sample one (input, output) pair for the whole batch,
/// draw slices from a seeded epoch permutation, optionally augment, and apply
/// train_step. Inputs and targets come from the same underlying phantom.
class Trainer {
 public:
  /// `table` may be null only for an ungated model. Throws ConfigError / LookupError
  /// before any step if data or embeddings do not cover the policy levels.
  Trainer(ModelConfig model, TrainConfig config, PairPolicy policy, const EmbeddingTable* table,
          std::vector<SliceSet> data);

  TrainState initial_state() const;

  /// Runs `steps` more steps. `on_step` sees each record after its update.
  void run(TrainState& state, std::size_t steps,
           const std::function<void(const StepRecord&, const TrainState&)>& on_step = {}) const;

  const ConditionalUNet<float>& net() const { return net_; }
  const PairPolicy& policy() const { return policy_; }

 private:
  // picks[b] (or picks[0] for every element) indexes the policy pair of element b.
  void assemble_batch(TrainState& state, std::span<const std::size_t> picks, Tensor<float>& inputs,
                      Tensor<float>& targets) const;

  ModelConfig model_;
  TrainConfig config_;
  PairPolicy policy_;
  const EmbeddingTable* table_;
  std::vector<SliceSet> data_;
  ConditionalUNet<float> net_;
  std::vector<double> weights_;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
};

struct TrainOptions {
  std::filesystem::path output_dir;  // checkpoints and train_log.csv; empty = in-memory only
  std::optional<std::filesystem::path> resume_from;
  std::string kind = "proposed";
  nlohmann::json config_snapshot = nlohmann::json::object();
};

/// Full training run over the manifest's training split. The returned checkpoint
/// carries the model and train configs, global scale, embedding table, and the
/// complete optimizer / rng state. Writes `<output_dir>/final` and
/// `<output_dir>/step_<n>` checkpoints plus an append-only train_log.csv.
Checkpoint train(const DatasetManifest& manifest, const ModelConfig& model_config,
                 const TrainConfig& train_config, const EmbeddingTable& table,
                 const TrainOptions& options = {});

/// Same loop with an explicit policy and optional table (used by the plain baseline).
Checkpoint train_with_policy(const DatasetManifest& manifest, const ModelConfig& model_config,
                             const TrainConfig& train_config, const PairPolicy& policy,
                             const EmbeddingTable* table, const TrainOptions& options);

}  // namespace petcond
