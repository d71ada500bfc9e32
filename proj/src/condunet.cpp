// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include "petcond/condunet.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "petcond/errors.hpp"
#include "petcond/nn_ops.hpp"
#include "petcond/rng.hpp"

namespace petcond {

void ModelConfig::validate() const {
  if (depth < 2) throw ConfigError("model depth must be at least 2");
  if (channel_multipliers.size() != depth)
    throw ConfigError("channel_multipliers must have one entry per level (" +
                      std::to_string(depth) + ")");
  if (base_channels == 0) throw ConfigError("base_channels must be positive");
  if (groups_for_norm == 0) throw ConfigError("groups_for_norm must be positive");
  if (conv_kernel == 0 || conv_kernel % 2 == 0) throw ConfigError("conv_kernel must be odd");
  if (blocks_per_level == 0) throw ConfigError("blocks_per_level must be positive");
  if (gated && embedding_dim == 0) throw ConfigError("embedding_dim must be positive");
  for (std::size_t l = 0; l < depth; ++l) {
    if (channel_multipliers[l] == 0) throw ConfigError("channel multipliers must be positive");
    if (channels(l) % groups_for_norm != 0)
      throw ConfigError("level " + std::to_string(l) + " channel count " +
                        std::to_string(channels(l)) + " is not divisible by groups_for_norm " +
                        std::to_string(groups_for_norm));
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"depth", c.depth},
       {"base_channels", c.base_channels},
       {"channel_multipliers", c.channel_multipliers},
       {"conv_kernel", c.conv_kernel},
       {"blocks_per_level", c.blocks_per_level},
       {"embedding_dim", c.embedding_dim},
       {"groups_for_norm", c.groups_for_norm},
       {"gated", c.gated},
       {"residual", c.residual}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.depth = j.value("depth", d.depth);
  c.base_channels = j.value("base_channels", d.base_channels);
  c.channel_multipliers = j.value("channel_multipliers", d.channel_multipliers);
  c.conv_kernel = j.value("conv_kernel", d.conv_kernel);
  c.blocks_per_level = j.value("blocks_per_level", d.blocks_per_level);
  c.embedding_dim = j.value("embedding_dim", d.embedding_dim);
  c.groups_for_norm = j.value("groups_for_norm", d.groups_for_norm);
  c.gated = j.value("gated", d.gated);
  c.residual = j.value("residual", d.residual);
}

// ---------------------------------------------------------------------------
// Parameter sets

template <typename T>
std::size_t ParameterSet<T>::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].name == name) return i;
  throw LookupError("no parameter named '" + name + "'");
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.value.size();
  return n;
}

template <typename T>
ParameterSet<T> ParameterSet<T>::zeros_like() const {
  ParameterSet out;
  out.entries.reserve(entries.size());
  for (const auto& e : entries) out.entries.push_back({e.name, Tensor<T>(e.value.shape)});
  return out;
}

template <typename T>
bool ParameterSet<T>::all_finite() const {
  for (const auto& e : entries)
    for (T v : e.value.data)
      if (!std::isfinite(v)) return false;
  return true;
}

template <typename To, typename From>
ParameterSet<To> cast_parameters(const ParameterSet<From>& src) {
  ParameterSet<To> out;
  for (const auto& e : src.entries) {
    Tensor<To> t(e.value.shape);
    std::transform(e.value.data.begin(), e.value.data.end(), t.data.begin(),
                   [](From v) { return static_cast<To>(v); });
    out.entries.push_back({e.name, std::move(t)});
  }
  return out;
}

template struct ParameterSet<float>;
template struct ParameterSet<double>;
template ParameterSet<double> cast_parameters<double, float>(const ParameterSet<float>&);
template ParameterSet<float> cast_parameters<float, double>(const ParameterSet<double>&);
template ParameterSet<float> cast_parameters<float, float>(const ParameterSet<float>&);
template ParameterSet<double> cast_parameters<double, double>(const ParameterSet<double>&);

// ---------------------------------------------------------------------------
// Layout

namespace {

struct ConvRef {
  std::size_t weight = 0, bias = 0, cin = 0, cout = 0, kernel = 0;
};
struct NormRef {
  std::size_t gamma = 0, beta = 0;
};
struct BlockRef {
  ConvRef conv;
  NormRef norm;
};
struct GateRef {
  std::size_t weight = 0, bias = 0;
};
struct StageRef {
  std::optional<ConvRef> up;
  std::vector<BlockRef> blocks;
  std::optional<GateRef> gate;
  std::size_t channels = 0;
};

struct LayoutBuilder {
  std::vector<ParamSpec> specs;

  std::size_t add(std::string name, Shape shape, ParamRole role, std::size_t fan_in = 0) {
    specs.push_back({std::move(name), std::move(shape), role, fan_in});
    return specs.size() - 1;
  }

  ConvRef conv(const std::string& prefix, std::size_t cin, std::size_t cout, std::size_t k) {
    const std::size_t fan_in = cin * k * k;
    ConvRef r{0, 0, cin, cout, k};
    r.weight = add(prefix + ".weight", {cout, cin, k, k}, ParamRole::ConvWeight, fan_in);
    r.bias = add(prefix + ".bias", {cout}, ParamRole::ConvBias, fan_in);
    return r;
  }

  BlockRef block(const std::string& prefix, std::size_t cin, std::size_t cout, std::size_t k) {
    BlockRef b;
    b.conv = conv(prefix + ".conv", cin, cout, k);
    b.norm.gamma = add(prefix + ".norm.weight", {cout}, ParamRole::NormGamma);
    b.norm.beta = add(prefix + ".norm.bias", {cout}, ParamRole::NormBeta);
    return b;
  }

  GateRef gate(const std::string& prefix, std::size_t channels, std::size_t dim) {
    GateRef g;
    g.weight = add(prefix + ".weight", {channels, dim}, ParamRole::GateWeight);
    g.bias = add(prefix + ".bias", {channels}, ParamRole::GateBias);
    return g;
  }
};

}  // namespace

template <typename T>
struct ConditionalUNet<T>::Layout {
  std::vector<StageRef> encoder;
  std::vector<StageRef> decoder;  // indexed by level
  ConvRef head;
  std::size_t param_count = 0;
};

namespace {

template <typename LayoutT>
std::vector<ParamSpec> build_layout(const ModelConfig& c, LayoutT* layout) {
  c.validate();
  LayoutBuilder b;
  const std::size_t k = c.conv_kernel;
  std::vector<StageRef> encoder(c.depth);
  std::vector<StageRef> decoder(c.depth - 1);

  for (std::size_t l = 0; l < c.depth; ++l) {
    const std::string prefix = "enc" + std::to_string(l);
    StageRef& s = encoder[l];
    s.channels = c.channels(l);
    std::size_t cin = l == 0 ? 1 : c.channels(l - 1);
    for (std::size_t j = 0; j < c.blocks_per_level; ++j) {
      s.blocks.push_back(b.block(prefix + ".block" + std::to_string(j), cin, s.channels, k));
      cin = s.channels;
    }
    if (c.gated) s.gate = b.gate(prefix + ".gate", s.channels, c.embedding_dim);
  }
  for (std::size_t i = 0; i + 1 < c.depth; ++i) {
    const std::size_t l = c.depth - 2 - i;
    const std::string prefix = "dec" + std::to_string(l);
    StageRef& s = decoder[l];
    s.channels = c.channels(l);
    s.up = b.conv(prefix + ".up", c.channels(l + 1), s.channels, k);
    std::size_t cin = 2 * s.channels;
    for (std::size_t j = 0; j < c.blocks_per_level; ++j) {
      s.blocks.push_back(b.block(prefix + ".block" + std::to_string(j), cin, s.channels, k));
      cin = s.channels;
    }
    if (c.gated) s.gate = b.gate(prefix + ".gate", s.channels, c.embedding_dim);
  }
  const ConvRef head = b.conv("head", c.channels(0), 1, 1);

  if (layout) {
    layout->encoder = std::move(encoder);
    layout->decoder = std::move(decoder);
    layout->head = head;
    layout->param_count = b.specs.size();
  }
  return b.specs;
}

struct NoLayout {
  std::vector<StageRef> encoder, decoder;
  ConvRef head;
  std::size_t param_count = 0;
};

}  // namespace

std::vector<ParamSpec> parameter_specs(const ModelConfig& config) {
  return build_layout<NoLayout>(config, nullptr);
}

std::size_t parameter_count(const ModelConfig& config) {
  std::size_t n = 0;
  for (const auto& s : parameter_specs(config)) n += element_count(s.shape);
  return n;
}

template <typename T>
ParameterSet<T> init_parameters(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  ParameterSet<T> params;
  for (const auto& spec : parameter_specs(config)) {
    Tensor<T> t(spec.shape);
    switch (spec.role) {
      case ParamRole::ConvWeight:
      case ParamRole::ConvBias: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (T& v : t.data) v = static_cast<T>(dist(rng));
        break;
      }
      case ParamRole::NormGamma:
      case ParamRole::GateBias:
        std::fill(t.data.begin(), t.data.end(), T{1});
        break;
      case ParamRole::NormBeta:
      case ParamRole::GateWeight:
        break;
    }
    params.entries.push_back({spec.name, std::move(t)});
  }
  return params;
}

template ParameterSet<float> init_parameters<float>(const ModelConfig&, std::uint64_t);
template ParameterSet<double> init_parameters<double>(const ModelConfig&, std::uint64_t);

template <typename T>
Tensor<T> gate(const Tensor<T>& features, const Tensor<T>& embedding, const GateParams<T>& params) {
  if (params.weight.shape.size() != 2 || params.bias.shape.size() != 1 ||
      params.weight.shape[0] != params.bias.shape[0])
    throw ShapeError("gate weight must be [C, D] and bias [C]");
  if (features.shape.size() != 4 || features.shape[1] != params.bias.shape[0])
    throw ShapeError("gate channel count mismatch: features " + shape_string(features.shape) +
                     ", gate " + shape_string(params.weight.shape));
  if (embedding.shape.size() != 2 || embedding.shape[1] != params.weight.shape[1])
    throw ShapeError("gate embedding dimension mismatch: " + shape_string(embedding.shape));
  Tensor<T> out;
  Tensor<T> gain;
  nn::gate_forward<T>(features, embedding, params.weight.span(), params.bias.span(), out, gain);
  return out;
}

template Tensor<float> gate<float>(const Tensor<float>&, const Tensor<float>&,
                                   const GateParams<float>&);
template Tensor<double> gate<double>(const Tensor<double>&, const Tensor<double>&,
                                     const GateParams<double>&);

// ---------------------------------------------------------------------------
// Network

template <typename T>
ConditionalUNet<T>::ConditionalUNet(ModelConfig config)
    : config_(std::move(config)), layout_(std::make_unique<Layout>()) {
  build_layout(config_, layout_.get());
}

template <typename T>
ConditionalUNet<T>::~ConditionalUNet() = default;
template <typename T>
ConditionalUNet<T>::ConditionalUNet(ConditionalUNet&&) noexcept = default;
template <typename T>
ConditionalUNet<T>& ConditionalUNet<T>::operator=(ConditionalUNet&&) noexcept = default;

namespace {

template <typename T>
std::span<const T> cspan(const ParameterSet<T>& p, std::size_t i) {
  return p[i].span();
}

template <typename T>
Tensor<T> block_forward(const ParameterSet<T>& p, const BlockRef& b, std::size_t groups,
                        Tensor<T> input, BlockCache<T>* cache) {
  Tensor<T> conv_out;
  Tensor<T> norm_out;
  Tensor<T> out;
  std::vector<double> mean;
  std::vector<double> rstd;
  nn::conv2d_forward<T>(input, cspan(p, b.conv.weight), cspan(p, b.conv.bias), b.conv.cout,
                        b.conv.kernel, conv_out);
  nn::group_norm_forward<T>(conv_out, cspan(p, b.norm.gamma), cspan(p, b.norm.beta), groups,
                            norm_out, mean, rstd);
  nn::silu_forward<T>(norm_out, out);
  if (cache) {
    cache->input = std::move(input);
    cache->conv_out = std::move(conv_out);
    cache->norm_out = std::move(norm_out);
    cache->mean = std::move(mean);
    cache->rstd = std::move(rstd);
  }
  return out;
}

template <typename T>
Tensor<T> block_backward(const ParameterSet<T>& p, const BlockRef& b, std::size_t groups,
                         const BlockCache<T>& cache, const Tensor<T>& grad, ParameterSet<T>& g,
                         bool need_input_grad) {
  Tensor<T> d_norm;
  Tensor<T> d_conv;
  Tensor<T> d_input;
  nn::silu_backward<T>(cache.norm_out, grad, d_norm);
  nn::group_norm_backward<T>(cache.conv_out, cspan(p, b.norm.gamma), groups, cache.mean,
                             cache.rstd, d_norm, d_conv, g[b.norm.gamma].span(),
                             g[b.norm.beta].span());
  nn::conv2d_backward<T>(cache.input, cspan(p, b.conv.weight), b.conv.cout, b.conv.kernel, d_conv,
                         need_input_grad ? &d_input : nullptr, g[b.conv.weight].span(),
                         g[b.conv.bias].span());
  return d_input;
}

template <typename T>
Tensor<T> gate_stage_forward(const ParameterSet<T>& p, const GateRef& r, Tensor<T> input,
                             const Tensor<T>& emb, GateCache<T>* cache) {
  Tensor<T> out;
  Tensor<T> gain;
  nn::gate_forward<T>(input, emb, cspan(p, r.weight), cspan(p, r.bias), out, gain);
  if (cache) {
    cache->input = std::move(input);
    cache->gain = std::move(gain);
  }
  return out;
}

void check_embedding(const Shape& shape, std::size_t batch, std::size_t dim, const char* which) {
  if (shape.size() != 2 || shape[0] != batch || shape[1] != dim)
    throw ShapeError(std::string(which) + " embedding must be [" + std::to_string(batch) + ", " +
                     std::to_string(dim) + "], got " + shape_string(shape));
}

}  // namespace

template <typename T>
Tensor<T> ConditionalUNet<T>::forward(const ParameterSet<T>& params, const Tensor<T>& x,
                                      const Tensor<T>& emb_in, const Tensor<T>& emb_out,
                                      ForwardCache<T>* cache) const {
  if (params.size() != layout_->param_count)
    throw ShapeError("parameter set does not match the model layout");
  if (x.shape.size() != 4 || x.shape[1] != 1)
    throw ShapeError("model input must be [B, 1, H, W], got " + shape_string(x.shape));
  const std::size_t div = config_.spatial_divisor();
  if (x.shape[2] % div != 0 || x.shape[3] % div != 0)
    throw ShapeError("spatial size " + std::to_string(x.shape[2]) + "x" +
                     std::to_string(x.shape[3]) + " is not divisible by " + std::to_string(div));
  if (config_.gated) {
    check_embedding(emb_in.shape, x.shape[0], config_.embedding_dim, "input-level");
    check_embedding(emb_out.shape, x.shape[0], config_.embedding_dim, "output-level");
  }

  const std::size_t groups = config_.groups_for_norm;
  const std::size_t depth = config_.depth;
  if (cache) {
    cache->emb_in = emb_in;
    cache->emb_out = emb_out;
    cache->encoder.assign(depth, {});
    cache->decoder.assign(depth - 1, {});
  }

  std::vector<Tensor<T>> skips(depth);
  Tensor<T> h = x;
  for (std::size_t l = 0; l < depth; ++l) {
    const StageRef& stage = layout_->encoder[l];
    StageCache<T>* sc = cache ? &cache->encoder[l] : nullptr;
    if (sc) sc->blocks.resize(stage.blocks.size());
    for (std::size_t j = 0; j < stage.blocks.size(); ++j)
      h = block_forward(params, stage.blocks[j], groups, std::move(h),
                        sc ? &sc->blocks[j] : nullptr);
    if (stage.gate)
      h = gate_stage_forward(params, *stage.gate, std::move(h), emb_in, sc ? &sc->gate : nullptr);
    if (l + 1 < depth) {
      skips[l] = h;
      Tensor<T> pooled;
      nn::avg_pool2_forward<T>(h, pooled);
      h = std::move(pooled);
    }
  }

  for (std::size_t i = 0; i + 1 < depth; ++i) {
    const std::size_t l = depth - 2 - i;
    const StageRef& stage = layout_->decoder[l];
    StageCache<T>* sc = cache ? &cache->decoder[l] : nullptr;
    Tensor<T> up;
    Tensor<T> up_conv;
    nn::upsample2_forward<T>(h, up);
    nn::conv2d_forward<T>(up, cspan(params, stage.up->weight), cspan(params, stage.up->bias),
                          stage.up->cout, stage.up->kernel, up_conv);
    if (sc) sc->up_input = std::move(up);
    nn::concat_channels<T>(up_conv, skips[l], h);
    if (sc) sc->blocks.resize(stage.blocks.size());
    for (std::size_t j = 0; j < stage.blocks.size(); ++j)
      h = block_forward(params, stage.blocks[j], groups, std::move(h),
                        sc ? &sc->blocks[j] : nullptr);
    if (stage.gate)
      h = gate_stage_forward(params, *stage.gate, std::move(h), emb_out,
                             sc ? &sc->gate : nullptr);
  }

  Tensor<T> y;
  const ConvRef& head = layout_->head;
  nn::conv2d_forward<T>(h, cspan(params, head.weight), cspan(params, head.bias), head.cout,
                        head.kernel, y);
  if (config_.residual)
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += x.data[i];
  if (cache) cache->head_input = std::move(h);
  return y;
}

template <typename T>
void ConditionalUNet<T>::backward(const ParameterSet<T>& params, const ForwardCache<T>& cache,
                                  const Tensor<T>& grad_output, ParameterSet<T>& grads) const {
  if (cache.encoder.size() != config_.depth)
    throw ShapeError("backward needs a cache filled by forward()");
  bool layout_matches = grads.size() == params.size();
  for (std::size_t i = 0; layout_matches && i < grads.size(); ++i)
    layout_matches = grads[i].shape == params[i].shape;
  if (layout_matches) {
    for (auto& e : grads.entries) std::fill(e.value.data.begin(), e.value.data.end(), T{});
  } else {
    grads = params.zeros_like();
  }

  const std::size_t groups = config_.groups_for_norm;
  const std::size_t depth = config_.depth;

  Tensor<T> dh;
  const ConvRef& head = layout_->head;
  nn::conv2d_backward<T>(cache.head_input, cspan(params, head.weight), head.cout, head.kernel,
                         grad_output, &dh, grads[head.weight].span(), grads[head.bias].span());

  std::vector<Tensor<T>> d_skips(depth);
  for (std::size_t l = 0; l + 1 < depth; ++l) {
    const StageRef& stage = layout_->decoder[l];
    const StageCache<T>& sc = cache.decoder[l];
    if (stage.gate) {
      Tensor<T> d_in;
      nn::gate_backward<T>(sc.gate.input, cache.emb_out, sc.gate.gain, dh, d_in,
                           grads[stage.gate->weight].span(), grads[stage.gate->bias].span());
      dh = std::move(d_in);
    }
    for (std::size_t j = stage.blocks.size(); j-- > 0;)
      dh = block_backward(params, stage.blocks[j], groups, sc.blocks[j], dh, grads, true);
    Tensor<T> d_up_conv;
    nn::split_channels<T>(dh, stage.channels, d_up_conv, d_skips[l]);
    Tensor<T> d_up;
    nn::conv2d_backward<T>(sc.up_input, cspan(params, stage.up->weight), stage.up->cout,
                           stage.up->kernel, d_up_conv, &d_up, grads[stage.up->weight].span(),
                           grads[stage.up->bias].span());
    nn::upsample2_backward<T>(d_up, dh);
  }

  for (std::size_t l = depth; l-- > 0;) {
    const StageRef& stage = layout_->encoder[l];
    const StageCache<T>& sc = cache.encoder[l];
    if (l + 1 < depth) {
      Tensor<T> d_pool;
      nn::avg_pool2_backward<T>(dh, d_pool);
      const Tensor<T>& ds = d_skips[l];
      for (std::size_t i = 0; i < d_pool.size(); ++i) d_pool.data[i] += ds.data[i];
      dh = std::move(d_pool);
    }
    if (stage.gate) {
      Tensor<T> d_in;
      nn::gate_backward<T>(sc.gate.input, cache.emb_in, sc.gate.gain, dh, d_in,
                           grads[stage.gate->weight].span(), grads[stage.gate->bias].span());
      dh = std::move(d_in);
    }
    for (std::size_t j = stage.blocks.size(); j-- > 0;) {
      const bool need_input_grad = !(l == 0 && j == 0);
      dh = block_backward(params, stage.blocks[j], groups, sc.blocks[j], dh, grads,
                          need_input_grad);
    }
  }
}

template class ConditionalUNet<float>;
template class ConditionalUNet<double>;

template <typename T>
Tensor<T> batch_embedding(const ConditionEmbedding& embedding, std::size_t batch) {
  const std::size_t dim = embedding.vector.size();
  Tensor<T> out({batch, dim});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t k = 0; k < dim; ++k) out.data[b * dim + k] = static_cast<T>(embedding.vector[k]);
  return out;
}

template Tensor<float> batch_embedding<float>(const ConditionEmbedding&, std::size_t);
template Tensor<double> batch_embedding<double>(const ConditionEmbedding&, std::size_t);

namespace {

Tensor<float> slice_to_input(const ImageSlice& slice) {
  Tensor<float> x({1, 1, slice.height, slice.width});
  std::transform(slice.intensity.begin(), slice.intensity.end(), x.data.begin(),
                 [](double v) { return static_cast<float>(v); });
  return x;
}

ImageSlice output_to_slice(const Tensor<float>& y, const ImageSlice& like, const CountLevel& level) {
  ImageSlice out;
  out.height = like.height;
  out.width = like.width;
  out.scale = like.scale;
  out.level = level;
  out.intensity.resize(y.size());
  std::transform(y.data.begin(), y.data.end(), out.intensity.begin(),
                 [](float v) { return std::max(0.0, static_cast<double>(v)); });
  return out;
}

}  // namespace

ImageSlice denoise(const ParameterSet<float>& params, const ModelConfig& config,
                   const ImageSlice& slice, const CountLevel& level_in,
                   const CountLevel& level_out, const EmbeddingTable& table) {
  if (!(level_in < level_out))
    throw ConstraintError("output count level " + level_out.label() +
                          " must be higher than input level " + level_in.label());
  if (!config.gated) throw ConfigError("denoise() needs a gated model; use denoise_plain()");
  const auto& e_in = table.at(level_in);
  const auto& e_out = table.at(level_out);
  if (table.dim != config.embedding_dim)
    throw ShapeError("embedding table dimension " + std::to_string(table.dim) +
                     " does not match model embedding_dim " +
                     std::to_string(config.embedding_dim));
  const ConditionalUNet<float> net(config);
  const auto y = net.forward(params, slice_to_input(slice), batch_embedding<float>(e_in, 1),
                             batch_embedding<float>(e_out, 1));
  return output_to_slice(y, slice, level_out);
}

ImageSlice denoise_plain(const ParameterSet<float>& params, const ModelConfig& config,
                         const ImageSlice& slice, const CountLevel& level_out) {
  const ConditionalUNet<float> net(config);
  const auto y = net.forward(params, slice_to_input(slice), {}, {});
  return output_to_slice(y, slice, level_out);
}

}  // namespace petcond
