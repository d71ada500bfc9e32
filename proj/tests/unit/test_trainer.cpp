// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "petcond/checkpoint.hpp"
#include "petcond/errors.hpp"
#include "petcond/trainer.hpp"
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

TrainConfig tiny_train(std::size_t steps) {
  TrainConfig t;
  t.batch_size = 2;
  t.steps = steps;
  t.seed = 9;
  return t;
}

const DatasetManifest& tiny_dataset() {
  static const DatasetManifest manifest = [] {
    SimulationConfig c;
    c.phantom.size = 16;
    c.n_phantoms = 5;
    c.total_expected_counts = 100000;
    c.seed = 1;
    return simulate_dataset(c, testing::scratch_dir("trainer_data"), false);
  }();
  return manifest;
}

Tensor<float> random_batch(Shape shape, std::uint64_t seed) {
  const auto s = testing::random_slice(1, element_count(shape), seed);
  return Tensor<float>(std::move(shape), std::vector<float>(s.intensity.begin(), s.intensity.end()));
}

}  // namespace

TEST_CASE("pair policies hold only increasing pairs", "[trainer]") {
  const auto levels = registry();
  const auto all = PairPolicy::all_pairs(levels);
  CHECK(all.pairs().size() == 15);
  for (const auto& [in, out] : all.pairs()) CHECK(in < out);
  CHECK(all.levels() == levels);

  CHECK(PairPolicy::fixed(CountLevel::parse("1/100"), CountLevel::full()).pairs().size() == 1);
  CHECK_THROWS_AS(PairPolicy::fixed(CountLevel::full(), CountLevel::parse("1/2")), ConstraintError);
  CHECK(pair_label({CountLevel::parse("1/4"), CountLevel::full()}) == "1/4->full");
}

TEST_CASE("pairs are sampled uniformly", "[trainer]") {
  Rng rng(123);
  const auto single = PairPolicy::all_pairs(std::vector<CountLevel>{CountLevel::parse("1/100"), CountLevel::full()});
  for (int i = 0; i < 50; ++i)
    CHECK(sample_pair(single, rng) == LevelPair{CountLevel::parse("1/100"), CountLevel::full()});

  const auto all = PairPolicy::all_pairs(registry());
  std::map<std::string, int> counts;
  for (int i = 0; i < 15000; ++i) ++counts[pair_label(sample_pair(all, rng))];
  REQUIRE(counts.size() == 15);
  const double tol = 3.0 * std::sqrt(1000.0 * 14.0 / 15.0);
  for (const auto& [label, n] : counts) {
    INFO(label);
    CHECK(std::abs(n - 1000) <= tol);
  }
  CHECK_THROWS_AS(sample_pair(PairPolicy{}, rng), ConfigError);
}

TEST_CASE("noise-weighted pair losses follow the level variances", "[trainer]") {
  const auto policy = PairPolicy::all_pairs(registry());
  const auto flat = pair_loss_weights(policy, 0.0);
  CHECK(flat == std::vector<double>(15, 1.0));

  const auto w = pair_loss_weights(policy, 1.0);
  REQUIRE(w.size() == 15);
  double sum = 0.0;
  std::map<std::string, double> by_label;
  for (std::size_t i = 0; i < w.size(); ++i) {
    sum += w[i];
    by_label[pair_label(policy.pairs()[i])] = w[i];
  }
  CHECK(sum == Catch::Approx(15.0).epsilon(1e-12));
  // Noise variance between levels scales with 1/p_in - 1/p_out: 1 for 1/2->full, 99 for 1/100->full.
  CHECK(by_label.at("1/2->full") / by_label.at("1/100->full") == Catch::Approx(99.0).epsilon(1e-12));
  CHECK(by_label.at("1/4->1/2") / by_label.at("1/2->full") == Catch::Approx(0.5).epsilon(1e-12));

  const auto single = pair_loss_weights(PairPolicy::fixed(CountLevel::parse("1/100"), CountLevel::full()),
                                        1.0);
  CHECK(single == std::vector<double>{1.0});
  CHECK_THROWS_AS(pair_loss_weights(policy, -1.0), ConfigError);

  const auto half = pair_loss_weights(policy, 0.5);
  std::map<std::string, double> half_by_label;
  for (std::size_t i = 0; i < half.size(); ++i) half_by_label[pair_label(policy.pairs()[i])] = half[i];
  CHECK(half_by_label.at("1/2->full") / half_by_label.at("1/100->full") ==
        Catch::Approx(std::sqrt(99.0)).epsilon(1e-12));
}

TEST_CASE("a zero-loss step leaves parameters unchanged", "[trainer]") {
  const auto model = tiny_model();
  const ConditionalUNet<float> net(model);
  auto params = init_parameters<float>(model, 1);
  const auto before = params;
  auto opt = make_optimizer_state(params);
  auto cfg = tiny_train(1);
  cfg.adamw.weight_decay = 0.0;  // decoupled decay would shrink weights even at zero gradient

  const auto x = random_batch({2, 1, 8, 8}, 2);
  const auto e = random_batch({2, 8}, 3);
  const auto target = net.forward(params, x, e, e);
  const auto r = train_step(net, params, opt, cfg, x, target, e, e);
  CHECK(r.loss == 0.0);
  CHECK(params == before);
  CHECK(opt.step == 1);

  // A zero loss weight removes the gradient even when the loss itself is not zero.
  const auto other = random_batch({2, 1, 8, 8}, 5);
  const std::vector<double> zero{0.0};
  const auto weighted = train_step(net, params, opt, cfg, x, other, e, e, zero);
  CHECK(weighted.loss > 0.0);
  CHECK(params == before);
}

TEST_CASE("the parameter moving average follows its update rule", "[trainer]") {
  const auto model = tiny_model();
  const ConditionalUNet<float> net(model);
  auto params = init_parameters<float>(model, 1);
  auto opt = make_optimizer_state(params);
  auto cfg = tiny_train(3);
  cfg.ema_decay = 0.0;
  const auto x = random_batch({2, 1, 8, 8}, 2);
  const auto target = random_batch({2, 1, 8, 8}, 4);
  const auto e = random_batch({2, 8}, 3);

  train_step(net, params, opt, cfg, x, target, e, e);
  CHECK(opt.ema.size() == 0);

  cfg.ema_decay = 0.5;
  opt = make_optimizer_state(params);
  train_step(net, params, opt, cfg, x, target, e, e);
  REQUIRE(opt.ema == params);  // the first update seeds the average
  for (int step = 2; step <= 3; ++step) {
    const auto previous = opt.ema;
    train_step(net, params, opt, cfg, x, target, e, e);
    // Warm-up caps the decay at (1 + t) / (10 + t) = 3/12, then 4/13.
    const double d = std::min(0.5, (1.0 + step) / (10.0 + step));
    for (std::size_t p = 0; p < params.size(); ++p)
      for (std::size_t i = 0; i < params[p].size(); ++i)
        CHECK(opt.ema[p].data[i] == Catch::Approx(d * previous[p].data[i] + (1 - d) * params[p].data[i])
                                        .margin(1e-7));
  }
  CHECK_FALSE(opt.ema == params);

  cfg.ema_decay = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("non-finite losses abort with a diagnostic", "[trainer]") {
  const auto model = tiny_model();
  const ConditionalUNet<float> net(model);
  auto params = init_parameters<float>(model, 1);
  const auto before = params;
  auto opt = make_optimizer_state(params);
  auto x = random_batch({2, 1, 8, 8}, 2);
  x.data[5] = std::numeric_limits<float>::quiet_NaN();
  const auto e = random_batch({2, 8}, 3);
  try {
    train_step(net, params, opt, tiny_train(1), x, x, e, e);
    FAIL("expected NumericError");
  } catch (const NumericError& err) {
    CHECK_THAT(err.what(), Catch::Matchers::ContainsSubstring("step 1"));
    CHECK_THAT(err.what(), Catch::Matchers::ContainsSubstring("grad"));
  }
  CHECK(params == before);
}

TEST_CASE("training is deterministic and resumes bit-exactly", "[trainer]") {
  const auto& data = tiny_dataset();
  const auto model = tiny_model();
  const FallbackEmbedder backend(0, 8);
  const auto table = embedding_table(backend, registry());
  auto cfg = tiny_train(6);
  cfg.checkpoint_every = 3;

  TrainOptions a;
  a.output_dir = testing::scratch_dir("train_a");
  const auto full_run = train(data, model, cfg, table, a);
  CHECK(full_run.step == 6);
  CHECK(std::filesystem::exists(a.output_dir / "step_3" / "manifest.json"));

  TrainOptions b;
  b.output_dir = testing::scratch_dir("train_b");
  CHECK(train(data, model, cfg, table, b).params == full_run.params);

  TrainOptions resumed;
  resumed.output_dir = testing::scratch_dir("train_resumed");
  resumed.resume_from = a.output_dir / "step_3";
  const auto second_half = train(data, model, cfg, table, resumed);
  CHECK(second_half.step == 6);
  CHECK(second_half.params == full_run.params);
  CHECK(second_half.optimizer.m == full_run.optimizer.m);
  CHECK(second_half.rng_state == full_run.rng_state);

  std::ifstream log(a.output_dir / "train_log.csv");
  std::string line;
  std::getline(log, line);
  CHECK(line == "step,pair,loss,wall_seconds");
  int rows = 0;
  while (std::getline(log, line)) {
    ++rows;
    const auto loss = std::stod(line.substr(line.find(',', line.find(',') + 1) + 1));
    CHECK(std::isfinite(loss));
  }
  CHECK(rows == 6);
}

TEST_CASE("per-sample pairs with weighting and averaging stay reproducible", "[trainer]") {
  const auto& data = tiny_dataset();
  const auto model = tiny_model();
  const FallbackEmbedder backend(0, 8);
  const auto table = embedding_table(backend, registry());
  auto cfg = tiny_train(4);
  cfg.checkpoint_every = 2;
  cfg.pair_per_sample = true;
  cfg.noise_weight_power = 0.5;
  cfg.ema_decay = 0.99;

  TrainOptions a;
  a.output_dir = testing::scratch_dir("train_mixed_a");
  const auto full_run = train(data, model, cfg, table, a);
  REQUIRE(full_run.optimizer.ema.size() == full_run.params.size());

  TrainOptions resumed;
  resumed.output_dir = testing::scratch_dir("train_mixed_resumed");
  resumed.resume_from = a.output_dir / "step_2";
  const auto second_half = train(data, model, cfg, table, resumed);
  CHECK(second_half.params == full_run.params);
  CHECK(second_half.optimizer.ema == full_run.optimizer.ema);

  std::ifstream log(a.output_dir / "train_log.csv");
  std::string line;
  std::getline(log, line);
  // One label per batch element.
  while (std::getline(log, line)) {
    const auto pairs = line.substr(line.find(',') + 1, line.find(',', line.find(',') + 1) - line.find(',') - 1);
    CHECK(std::count(pairs.begin(), pairs.end(), ';') == 1);
  }

  const ConditionalUNet<float> net(model);
  auto params = init_parameters<float>(model, 1);
  auto opt = make_optimizer_state(params);
  const auto x = random_batch({2, 1, 8, 8}, 2);
  const auto e = random_batch({2, 8}, 3);
  const std::vector<double> three{1.0, 1.0, 1.0};
  CHECK_THROWS_AS(train_step(net, params, opt, cfg, x, x, e, e, three), ShapeError);
}

TEST_CASE("training fails fast on missing inputs", "[trainer]") {
  const auto& data = tiny_dataset();
  const auto model = tiny_model();
  const FallbackEmbedder backend(0, 8);
  const std::vector<CountLevel> partial{CountLevel::parse("1/2"), CountLevel::full()};
  const auto small_table = embedding_table(backend, partial);
  CHECK_THROWS_AS(train(data, model, tiny_train(2), small_table), LookupError);

  auto cfg = tiny_train(2);
  cfg.levels = {CountLevel::parse("1/3"), CountLevel::full()};
  const auto odd_table = embedding_table(backend, cfg.levels);
  CHECK_THROWS_AS(train(data, model, cfg, odd_table), IoError);
}
