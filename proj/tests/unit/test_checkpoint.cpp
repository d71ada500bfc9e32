// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <fstream>

#include "petcond/checkpoint.hpp"
#include "petcond/errors.hpp"
#include "petcond/ptf.hpp"
#include "support.hpp"

using namespace petcond;

namespace {

ModelConfig tiny_model() {
  ModelConfig c;
  c.depth = 2;
  c.base_channels = 4;
  c.channel_multipliers = {1, 2};
  c.embedding_dim = 8;
  c.groups_for_norm = 2;
  return c;
}

std::vector<SliceSet> random_data(std::size_t n) {
  std::vector<SliceSet> data;
  for (std::size_t i = 0; i < n; ++i) {
    SliceSet s{"s" + std::to_string(i), {}};
    for (const auto& level : registry()) {
      auto slice = testing::random_slice(8, 8, 10 * i + level.denominator());
      slice.level = level;
      s.slices.emplace(level, slice);
    }
    data.push_back(std::move(s));
  }
  return data;
}

Checkpoint trained_checkpoint(const EmbeddingTable& table) {
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.steps = 3;
  cfg.seed = 4;
  cfg.ema_decay = 0.9;
  const auto policy = PairPolicy::all_pairs(registry());
  const Trainer trainer(tiny_model(), cfg, policy, &table, random_data(3));
  auto state = trainer.initial_state();
  trainer.run(state, 3);
  return make_checkpoint(state, tiny_model(), cfg, 123.25, &table, policy, "proposed",
                         {{"note", "unit"}});
}

}  // namespace

TEST_CASE("checkpoints reload bit-exact and reproduce probe outputs", "[checkpoint]") {
  const FallbackEmbedder backend(2, 8);
  const auto table = embedding_table(backend, registry());
  const auto ck = trained_checkpoint(table);
  const auto dir = testing::scratch_dir("checkpoint_rt");
  save_checkpoint(ck, dir);
  const auto back = load_checkpoint(dir);

  CHECK(back.kind == ck.kind);
  CHECK(back.model == ck.model);
  CHECK(back.train == ck.train);
  CHECK(back.params == ck.params);
  CHECK(back.optimizer.m == ck.optimizer.m);
  CHECK(back.optimizer.v == ck.optimizer.v);
  CHECK(back.optimizer.step == 3);
  REQUIRE(back.optimizer.ema.size() == ck.params.size());
  CHECK(back.optimizer.ema == ck.optimizer.ema);
  CHECK(&back.inference_params() == &back.optimizer.ema);
  CHECK(back.rng_state == ck.rng_state);
  CHECK(back.order == ck.order);
  CHECK(back.cursor == ck.cursor);
  CHECK(back.global_scale == 123.25);
  CHECK(back.embeddings == ck.embeddings);
  CHECK(back.pairs.size() == 15);
  CHECK(back.config_snapshot == ck.config_snapshot);

  const ConditionalUNet<float> net(ck.model);
  Tensor<float> probe({2, 1, 8, 8}, 0.f);
  for (std::size_t i = 0; i < probe.size(); ++i) probe.data[i] = static_cast<float>(i % 7) * 0.1f;
  const auto e_in = batch_embedding<float>(table.at(CountLevel::parse("1/100")), 2);
  const auto e_out = batch_embedding<float>(table.at(CountLevel::full()), 2);
  CHECK(net.forward(ck.params, probe, e_in, e_out).data ==
        net.forward(back.params, probe, e_in, e_out).data);
}

TEST_CASE("damaged checkpoints are refused", "[checkpoint]") {
  const FallbackEmbedder backend(2, 8);
  const auto ck = trained_checkpoint(embedding_table(backend, registry()));
  const auto dir = testing::scratch_dir("checkpoint_bad");
  CHECK_THROWS_AS(load_checkpoint(dir), IoError);

  save_checkpoint(ck, dir);
  const auto& first = ck.params.entries.front();
  const auto file = dir / "params" / (first.name + ".ptf");
  REQUIRE(std::filesystem::exists(file));
  ptf::write(file, Tensor<float>({3}, 0.f));
  CHECK_THROWS_AS(load_checkpoint(dir), IoError);
}
