// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <fstream>

#include "petcond/config.hpp"
#include "petcond/errors.hpp"
#include "support.hpp"

using namespace petcond;
using nlohmann::json;

TEST_CASE("an empty config yields the documented defaults", "[config]") {
  const auto rc = parse_run_config(json::object(), "/base");
  CHECK(rc.simulation.n_phantoms == 48);
  CHECK(rc.simulation.phantom.size == 64);
  CHECK(rc.simulation.total_expected_counts == 2000000);
  ModelConfig desk;
  desk.base_channels = 16;
  CHECK(rc.model == desk);
  CHECK(rc.train.learning_rate == 1e-3);
  CHECK(rc.train.batch_size == 8);
  CHECK(rc.train.adamw.weight_decay == 0.01);
  CHECK(rc.train == TrainConfig{});
  CHECK(rc.evaluate.levels.size() == 5);
  CHECK(rc.evaluate.comparison_level == CountLevel::parse("1/100"));
  CHECK(rc.data_dir == "/base/runs/data");
  CHECK(rc.evaluate.checkpoint == "/base/runs/train/proposed/final");
  CHECK(rc.evaluate.plain_checkpoint == "/base/runs/train/plain-unet/final");
  CHECK(rc.snapshot == default_run_config_json());
}

TEST_CASE("user values override defaults and --seed overrides both seeds", "[config]") {
  const json user{{"model", {{"base_channels", 16}}},
                  {"train", {{"steps", 10}, {"seed", 3}}},
                  {"simulate", {{"output_dir", "/abs/data"}}}};
  const auto rc = parse_run_config(user, "/base", 77);
  CHECK(rc.model.base_channels == 16);
  CHECK(rc.model.depth == 4);
  CHECK(rc.train.steps == 10);
  CHECK(rc.train.seed == 77);
  CHECK(rc.simulation.seed == 77);
  CHECK(rc.data_dir == "/abs/data");
  CHECK(rc.snapshot.at("train").at("seed") == 77);
}

TEST_CASE("unknown keys, bad values and dimension mismatches are config errors", "[config]") {
  CHECK_THROWS_AS(parse_run_config({{"modle", json::object()}}, "."), ConfigError);
  CHECK_THROWS_AS(parse_run_config({{"train", {{"lr", 0.1}}}}, "."), ConfigError);
  CHECK_THROWS_AS(parse_run_config({{"train", {{"steps", "many"}}}}, "."), ConfigError);
  CHECK_THROWS_AS(parse_run_config({{"model", {{"embedding_dim", 64}}}}, "."), ConfigError);
  CHECK_THROWS_AS(parse_run_config({{"evaluate", {{"levels", {"full"}}}}}, "."), ConfigError);
  CHECK_THROWS_AS(parse_run_config({{"model", {{"groups_for_norm", 5}}}}, "."), ConfigError);
  CHECK_NOTHROW(parse_run_config(
      {{"model", {{"embedding_dim", 64}}}, {"embedder", {{"dim", 64}}}}, "."));
}

TEST_CASE("config files resolve paths next to themselves", "[config]") {
  const auto dir = testing::scratch_dir("config_file");
  std::ofstream(dir / "run.json") << "{\n  // comments are allowed\n  \"report\": {\"output_dir\": \"out\"}\n}\n";
  const auto rc = load_run_config(dir / "run.json");
  CHECK(rc.report.output_dir == dir / "out");
  CHECK_THROWS_AS(load_run_config(dir / "missing.json"), ConfigError);
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK_THROWS_AS(load_run_config(dir / "broken.json"), ConfigError);
}
