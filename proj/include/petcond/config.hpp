// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "petcond/condunet.hpp"
#include "petcond/dataset.hpp"
#include "petcond/embedder.hpp"
#include "petcond/trainer.hpp"

namespace petcond {

struct EvaluateConfig {
  std::filesystem::path checkpoint;        // default: <train.output_dir>/proposed/final
  std::filesystem::path plain_checkpoint;  // default: <train.output_dir>/plain-unet/final
  std::filesystem::path output_dir;
  std::vector<CountLevel> levels;
  std::vector<double> gaussian_sigmas;
  CountLevel comparison_level;
};

struct ReportConfig {
  std::filesystem::path output_dir;
};

/// Whole-workflow configuration. Sections: phantom, simulate, embedder, model,
/// train, evaluate, report. Missing keys take defaults, unknown keys are
/// rejected, and relative paths resolve against the config file's directory.
struct RunConfig {
  SimulationConfig simulation;
  std::filesystem::path data_dir;
  nlohmann::json embedder;
  PromptTemplate prompt;
  ModelConfig model;
  TrainConfig train;
  std::filesystem::path train_dir;
  EvaluateConfig evaluate;
  ReportConfig report;
  /// Effective configuration with every default filled in.
  nlohmann::json snapshot;
};

/// Every key with its default value.
nlohmann::json default_run_config_json();

/// Throws ConfigError on unknown sections or keys, wrong types, or invalid values.
RunConfig parse_run_config(const nlohmann::json& user, const std::filesystem::path& base_dir,
                           std::optional<std::uint64_t> seed_override = std::nullopt);

RunConfig load_run_config(const std::filesystem::path& file,
                          std::optional<std::uint64_t> seed_override = std::nullopt);

}  // namespace petcond
