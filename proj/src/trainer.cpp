// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include "petcond/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "petcond/checkpoint.hpp"
#include "petcond/errors.hpp"

namespace fs = std::filesystem;

namespace petcond {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (levels.size() < 2) throw ConfigError("training needs at least two count levels");
  if (!(adamw.beta1 >= 0.0 && adamw.beta1 < 1.0 && adamw.beta2 >= 0.0 && adamw.beta2 < 1.0))
    throw ConfigError("AdamW betas must lie in [0, 1)");
  if (!(adamw.eps > 0.0) || adamw.weight_decay < 0.0)
    throw ConfigError("AdamW eps must be positive and weight_decay nonnegative");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ConfigError("ema_decay must lie in [0, 1)");
  if (!(noise_weight_power >= 0.0 && noise_weight_power <= 1.0))
    throw ConfigError("noise_weight_power must lie in [0, 1]");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  std::vector<std::string> labels;
  for (const auto& l : c.levels) labels.push_back(l.label());
  j = {{"learning_rate", c.learning_rate},
       {"batch_size", c.batch_size},
       {"steps", c.steps},
       {"beta1", c.adamw.beta1},
       {"beta2", c.adamw.beta2},
       {"eps", c.adamw.eps},
       {"weight_decay", c.adamw.weight_decay},
       {"seed", c.seed},
       {"levels", labels},
       {"augment", c.augment},
       {"checkpoint_every", c.checkpoint_every},
       {"ema_decay", c.ema_decay},
       {"noise_weight_power", c.noise_weight_power},
       {"pair_per_sample", c.pair_per_sample}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.steps = j.value("steps", d.steps);
  c.adamw.beta1 = j.value("beta1", d.adamw.beta1);
  c.adamw.beta2 = j.value("beta2", d.adamw.beta2);
  c.adamw.eps = j.value("eps", d.adamw.eps);
  c.adamw.weight_decay = j.value("weight_decay", d.adamw.weight_decay);
  c.seed = j.value("seed", d.seed);
  c.levels.clear();
  if (j.contains("levels")) {
    for (const auto& l : j.at("levels")) c.levels.push_back(CountLevel::parse(l.get<std::string>()));
  } else {
    c.levels = d.levels;
  }
  c.augment = j.value("augment", d.augment);
  c.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
  c.ema_decay = j.value("ema_decay", d.ema_decay);
  c.noise_weight_power = j.value("noise_weight_power", d.noise_weight_power);
  c.pair_per_sample = j.value("pair_per_sample", d.pair_per_sample);
}

std::string pair_label(const LevelPair& pair) {
  return pair.first.label() + "->" + pair.second.label();
}

PairPolicy PairPolicy::all_pairs(std::span<const CountLevel> levels) {
  std::vector<CountLevel> sorted(levels.begin(), levels.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  PairPolicy p;
  for (std::size_t i = 0; i < sorted.size(); ++i)
    for (std::size_t j = i + 1; j < sorted.size(); ++j) p.pairs_.emplace_back(sorted[i], sorted[j]);
  return p;
}

PairPolicy PairPolicy::fixed(const CountLevel& in, const CountLevel& out) {
  if (!(in < out))
    throw ConstraintError("output level " + out.label() + " must exceed input level " +
                          in.label());
  PairPolicy p;
  p.pairs_.emplace_back(in, out);
  return p;
}

std::vector<CountLevel> PairPolicy::levels() const {
  std::vector<CountLevel> out;
  for (const auto& [a, b] : pairs_) {
    out.push_back(a);
    out.push_back(b);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t sample_pair_index(const PairPolicy& policy, Rng& rng) {
  const auto& pairs = policy.pairs();
  if (pairs.empty()) throw ConfigError("pair policy has no eligible (input < output) pairs");
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
  return pick(rng);
}

LevelPair sample_pair(const PairPolicy& policy, Rng& rng) {
  return policy.pairs()[sample_pair_index(policy, rng)];
}

std::vector<double> pair_loss_weights(const PairPolicy& policy, double power) {
  const auto& pairs = policy.pairs();
  if (pairs.empty()) throw ConfigError("pair policy is empty");
  if (!(power >= 0.0)) throw ConfigError("noise weight power must be nonnegative");
  std::vector<double> w(pairs.size(), 1.0);
  if (power == 0.0) return w;
  double sum = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double variance = 1.0 / pairs[i].first.value() - 1.0 / pairs[i].second.value();
    w[i] = std::pow(variance, -power);
    sum += w[i];
  }
  const double mean = sum / static_cast<double>(w.size());
  for (double& x : w) x /= mean;  // exact 1 for a single-pair policy
  return w;
}

OptimizerState make_optimizer_state(const ParameterSet<float>& params) {
  return {params.zeros_like(), params.zeros_like(), 0, {}};
}

double mse_loss(const Tensor<float>& prediction, const Tensor<float>& target) {
  if (prediction.shape != target.shape)
    throw ShapeError("loss shapes differ: " + shape_string(prediction.shape) + " vs " +
                     shape_string(target.shape));
  double sum = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double d = static_cast<double>(prediction.data[i]) - target.data[i];
    sum += d * d;
  }
  return sum / static_cast<double>(prediction.size());
}

StepResult train_step(const ConditionalUNet<float>& net, ParameterSet<float>& params,
                      OptimizerState& optimizer, const TrainConfig& config,
                      const Tensor<float>& inputs, const Tensor<float>& targets,
                      const Tensor<float>& emb_in, const Tensor<float>& emb_out,
                      std::span<const double> sample_weights) {
  ForwardCache<float> cache;
  const Tensor<float> out = net.forward(params, inputs, emb_in, emb_out, &cache);
  const double loss = mse_loss(out, targets);

  const std::size_t batch = out.shape[0];
  if (sample_weights.size() > 1 && sample_weights.size() != batch)
    throw ShapeError("expected " + std::to_string(batch) + " sample weights, got " +
                     std::to_string(sample_weights.size()));
  Tensor<float> grad_out(out.shape);
  const std::size_t plane = out.size() / batch;
  for (std::size_t b = 0; b < batch; ++b) {
    const double w = sample_weights.empty() ? 1.0 : sample_weights[sample_weights.size() == 1 ? 0 : b];
    const double scale = 2.0 * w / static_cast<double>(out.size());
    for (std::size_t i = b * plane; i < (b + 1) * plane; ++i)
      grad_out.data[i] =
          static_cast<float>(scale * (static_cast<double>(out.data[i]) - targets.data[i]));
  }

  ParameterSet<float> grads;
  net.backward(params, cache, grad_out, grads);
  double sq = 0.0;
  for (const auto& e : grads.entries)
    for (float g : e.value.data) sq += static_cast<double>(g) * g;
  const double grad_norm = std::sqrt(sq);

  if (!std::isfinite(loss) || !std::isfinite(grad_norm)) {
    std::ostringstream os;
    os << "non-finite training state at step " << optimizer.step + 1 << ": loss=" << loss
       << " grad_norm=" << grad_norm;
    throw NumericError(os.str());
  }

  if (optimizer.m.size() != params.size()) optimizer = make_optimizer_state(params);
  optimizer.step += 1;
  const auto& a = config.adamw;
  const double t = static_cast<double>(optimizer.step);
  const double bias1 = 1.0 - std::pow(a.beta1, t);
  const double bias2 = 1.0 - std::pow(a.beta2, t);
  const double lr = config.learning_rate;
  const auto decay = static_cast<float>(1.0 - lr * a.weight_decay);
  const auto b1 = static_cast<float>(a.beta1);
  const auto b2 = static_cast<float>(a.beta2);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& w = params[p].data;
    auto& m = optimizer.m[p].data;
    auto& v = optimizer.v[p].data;
    const auto& g = grads[p].data;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0f - b1) * g[i];
      v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      w[i] = static_cast<float>(decay * w[i] - lr * m_hat / (std::sqrt(v_hat) + a.eps));
    }
  }
  if (config.ema_decay > 0.0) {
    if (optimizer.ema.size() != params.size()) {
      optimizer.ema = params;
    } else {
      // Short warm-up so the average is not dominated by the initial weights.
      const double d = std::min(config.ema_decay, (1.0 + t) / (10.0 + t));
      const auto keep = static_cast<float>(d);
      const auto take = static_cast<float>(1.0 - d);
      for (std::size_t p = 0; p < params.size(); ++p) {
        auto& e = optimizer.ema[p].data;
        const auto& w = params[p].data;
        for (std::size_t i = 0; i < e.size(); ++i) e[i] = keep * e[i] + take * w[i];
      }
    }
  }
  return {loss, grad_norm};
}

namespace {

// Dihedral transform code: bit 0 mirrors columns, bit 1 mirrors rows, bit 2 transposes
// (square images only).
void copy_transformed(const std::vector<double>& src, std::size_t h, std::size_t w, unsigned code,
                      float* dst) {
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      std::size_t sr = r;
      std::size_t sc = c;
      if (code & 4u) std::swap(sr, sc);
      if (code & 1u) sc = w - 1 - sc;
      if (code & 2u) sr = h - 1 - sr;
      dst[r * w + c] = static_cast<float>(src[sr * w + sc]);
    }
  }
}

}  // namespace

Trainer::Trainer(ModelConfig model, TrainConfig config, PairPolicy policy,
                 const EmbeddingTable* table, std::vector<SliceSet> data)
    : model_(std::move(model)),
      config_(std::move(config)),
      policy_(std::move(policy)),
      table_(table),
      data_(std::move(data)),
      net_(model_) {
  config_.validate();
  if (policy_.pairs().empty()) throw ConfigError("pair policy is empty");
  weights_ = pair_loss_weights(policy_, config_.noise_weight_power);
  if (data_.empty()) throw ConfigError("training split is empty");
  const auto levels = policy_.levels();
  for (const auto& set : data_) {
    for (const auto& level : levels) {
      const auto& s = set.at(level);
      if (height_ == 0) {
        height_ = s.height;
        width_ = s.width;
      }
      if (s.height != height_ || s.width != width_)
        throw ShapeError("training slices must share one size");
    }
  }
  if (height_ % model_.spatial_divisor() || width_ % model_.spatial_divisor())
    throw ShapeError("slice size is not divisible by 2^(depth-1)");
  if (model_.gated) {
    if (!table_) throw ConfigError("a gated model needs an embedding table");
    if (table_->dim != model_.embedding_dim)
      throw ShapeError("embedding table dimension " + std::to_string(table_->dim) +
                       " does not match model embedding_dim " +
                       std::to_string(model_.embedding_dim));
    for (const auto& level : levels) table_->at(level);
  }
}

TrainState Trainer::initial_state() const {
  TrainState s;
  s.params = init_parameters<float>(model_, mix_seed(config_.seed, 1));
  s.optimizer = make_optimizer_state(s.params);
  s.rng = Rng(mix_seed(config_.seed, 2));
  return s;
}

void Trainer::assemble_batch(TrainState& state, std::span<const std::size_t> picks,
                             Tensor<float>& inputs, Tensor<float>& targets) const {
  const std::size_t batch = config_.batch_size;
  const std::size_t plane = height_ * width_;
  inputs = Tensor<float>({batch, 1, height_, width_});
  targets = Tensor<float>({batch, 1, height_, width_});
  const unsigned n_codes = height_ == width_ ? 8u : 4u;
  std::uniform_int_distribution<unsigned> pick_code(0, n_codes - 1);
  for (std::size_t b = 0; b < batch; ++b) {
    if (state.cursor >= state.order.size()) {
      state.order.resize(data_.size());
      std::iota(state.order.begin(), state.order.end(), std::size_t{0});
      std::shuffle(state.order.begin(), state.order.end(), state.rng);
      state.cursor = 0;
    }
    const SliceSet& set = data_[state.order[state.cursor++]];
    const LevelPair& pair = policy_.pairs()[picks[picks.size() == 1 ? 0 : b]];
    const unsigned code = config_.augment ? pick_code(state.rng) : 0u;
    copy_transformed(set.at(pair.first).intensity, height_, width_, code,
                     inputs.data.data() + b * plane);
    copy_transformed(set.at(pair.second).intensity, height_, width_, code,
                     targets.data.data() + b * plane);
  }
}

void Trainer::run(TrainState& state, std::size_t steps,
                  const std::function<void(const StepRecord&, const TrainState&)>& on_step) const {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t batch = config_.batch_size;
  Tensor<float> inputs;
  Tensor<float> targets;
  std::vector<std::size_t> picks(config_.pair_per_sample ? batch : 1);
  std::vector<double> weights(picks.size());
  for (std::size_t i = 0; i < steps; ++i) {
    for (std::size_t k = 0; k < picks.size(); ++k) {
      picks[k] = sample_pair_index(policy_, state.rng);
      weights[k] = weights_[picks[k]];
    }
    assemble_batch(state, picks, inputs, targets);
    Tensor<float> emb_in;
    Tensor<float> emb_out;
    if (model_.gated) {
      const std::size_t dim = table_->dim;
      emb_in = Tensor<float>({batch, dim});
      emb_out = Tensor<float>({batch, dim});
      for (std::size_t b = 0; b < batch; ++b) {
        const LevelPair& pair = policy_.pairs()[picks[picks.size() == 1 ? 0 : b]];
        const auto& vi = table_->at(pair.first).vector;
        const auto& vo = table_->at(pair.second).vector;
        std::copy(vi.begin(), vi.end(), emb_in.data.begin() + static_cast<std::ptrdiff_t>(b * dim));
        std::copy(vo.begin(), vo.end(), emb_out.data.begin() + static_cast<std::ptrdiff_t>(b * dim));
      }
    }
    const StepResult r =
        train_step(net_, state.params, state.optimizer, config_, inputs, targets, emb_in, emb_out,
                   weights);
    state.step += 1;
    if (on_step) {
      const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
      std::string label;
      for (std::size_t k = 0; k < picks.size(); ++k)
        label += (k ? ";" : "") + pair_label(policy_.pairs()[picks[k]]);
      on_step({state.step, label, r.loss, wall.count()}, state);
    }
  }
}

Checkpoint train(const DatasetManifest& manifest, const ModelConfig& model_config,
                 const TrainConfig& train_config, const EmbeddingTable& table,
                 const TrainOptions& options) {
  return train_with_policy(manifest, model_config, train_config,
                           PairPolicy::all_pairs(train_config.levels), &table, options);
}

Checkpoint train_with_policy(const DatasetManifest& manifest, const ModelConfig& model_config,
                             const TrainConfig& train_config, const PairPolicy& policy,
                             const EmbeddingTable* table, const TrainOptions& options) {
  // Fail fast on missing level files before any compute.
  const auto levels = policy.levels();
  for (const PhantomEntry* e : manifest.entries(Split::Train))
    for (const auto& level : levels)
      if (!e->images.count(level) || !fs::exists(manifest.root / e->images.at(level)))
        throw IoError("phantom '" + e->id + "' is missing its " + level.label() + " image");

  Trainer trainer(model_config, train_config, policy, table,
                  load_split(manifest, Split::Train, levels));
  TrainState state;
  if (options.resume_from) {
    const Checkpoint ck = load_checkpoint(*options.resume_from);
    if (ck.model != model_config) throw ConfigError("resume checkpoint has a different model config");
    state = ck.to_state();
  } else {
    state = trainer.initial_state();
  }

  std::ofstream log;
  if (!options.output_dir.empty()) {
    fs::create_directories(options.output_dir);
    const auto log_path = options.output_dir / "train_log.csv";
    const bool fresh = !fs::exists(log_path) || !options.resume_from;
    log.open(log_path, fresh ? std::ios::trunc : std::ios::app);
    if (!log) throw IoError("cannot open " + log_path.string());
    log.precision(9);
    if (fresh) log << "step,pair,loss,wall_seconds\n";
  }

  auto snapshot = [&](const TrainState& s) {
    return make_checkpoint(s, model_config, train_config, manifest.global_scale, table, policy,
                           options.kind, options.config_snapshot);
  };

  const std::size_t remaining =
      train_config.steps > state.step ? train_config.steps - static_cast<std::size_t>(state.step) : 0;
  trainer.run(state, remaining, [&](const StepRecord& rec, const TrainState& s) {
    if (log.is_open()) {
      log << rec.step << ',' << rec.pair << ',' << rec.loss << ',' << rec.wall_seconds << '\n';
      log.flush();
    }
    if (!options.output_dir.empty() && train_config.checkpoint_every &&
        rec.step % train_config.checkpoint_every == 0)
      save_checkpoint(snapshot(s), options.output_dir / ("step_" + std::to_string(rec.step)));
  });

  Checkpoint final_ck = snapshot(state);
  if (!options.output_dir.empty()) save_checkpoint(final_ck, options.output_dir / "final");
  return final_ck;
}

}  // namespace petcond
