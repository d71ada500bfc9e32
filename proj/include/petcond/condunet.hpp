// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "petcond/countsim.hpp"
#include "petcond/embedder.hpp"
#include "petcond/tensor.hpp"

namespace petcond {

struct ModelConfig {
  std::size_t depth = 4;
  std::size_t base_channels = 32;
  std::vector<std::size_t> channel_multipliers{1, 2, 4, 8};
  std::size_t conv_kernel = 3;
  std::size_t blocks_per_level = 2;
  std::size_t embedding_dim = kDefaultEmbeddingDim;
  std::size_t groups_for_norm = 8;
  /// false builds the plain U-Net backbone (no gate parameters at all).
  bool gated = true;
  /// Adds the input slice to the head output (the network predicts a correction).
  bool residual = true;

  void validate() const;
  std::size_t channels(std::size_t level) const {
    return base_channels * channel_multipliers.at(level);
  }
  /// Inputs must be divisible by this along both spatial axes.
  std::size_t spatial_divisor() const { return std::size_t{1} << (depth - 1); }

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> value;

  bool operator==(const NamedTensor&) const = default;
};

/// Ordered, uniquely named parameter collection.
template <typename T>
struct ParameterSet {
  std::vector<NamedTensor<T>> entries;

  std::size_t index_of(const std::string& name) const;
  Tensor<T>& operator[](std::size_t i) { return entries[i].value; }
  const Tensor<T>& operator[](std::size_t i) const { return entries[i].value; }
  std::size_t size() const { return entries.size(); }
  std::size_t scalar_count() const;
  /// Same names and shapes, all values zero.
  ParameterSet zeros_like() const;
  bool all_finite() const;

  bool operator==(const ParameterSet&) const = default;
};

template <typename To, typename From>
ParameterSet<To> cast_parameters(const ParameterSet<From>& src);

enum class ParamRole { ConvWeight, ConvBias, NormGamma, NormBeta, GateWeight, GateBias };

struct ParamSpec {
  std::string name;
  Shape shape;
  ParamRole role;
  std::size_t fan_in = 0;
};

/// Parameter names, shapes and roles in canonical order; a pure function of the config.
std::vector<ParamSpec> parameter_specs(const ModelConfig& config);
std::size_t parameter_count(const ModelConfig& config);

/// Conv weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); norm gamma 1, beta 0;
/// gate weight 0, bias 1. Gates draw nothing from the generator, so a gated and a plain
/// model initialized from the same seed share every backbone value.
template <typename T>
ParameterSet<T> init_parameters(const ModelConfig& config, std::uint64_t seed);

template <typename T>
struct GateParams {
  Tensor<T> weight;  // [C, D]
  Tensor<T> bias;    // [C]
};

/// output[b, c, h, w] = (bias + weight * embedding[b])[c] * features[b, c, h, w].
template <typename T>
Tensor<T> gate(const Tensor<T>& features, const Tensor<T>& embedding, const GateParams<T>& params);

template <typename T>
struct BlockCache {
  Tensor<T> input;
  Tensor<T> conv_out;
  Tensor<T> norm_out;
  std::vector<double> mean;
  std::vector<double> rstd;
};

template <typename T>
struct GateCache {
  Tensor<T> input;
  Tensor<T> gain;  // [B, C]
};

template <typename T>
struct StageCache {
  Tensor<T> up_input;  // decoder only
  std::vector<BlockCache<T>> blocks;
  GateCache<T> gate;
};

/// Activations retained by a forward pass for the matching backward pass.
template <typename T>
struct ForwardCache {
  Tensor<T> emb_in;
  Tensor<T> emb_out;
  std::vector<StageCache<T>> encoder;
  std::vector<StageCache<T>> decoder;  // indexed by resolution level
  Tensor<T> head_input;
};

/// Conditional U-Net. Encoder stages run [conv block x N, gate(emb_in), avg-pool]
/// with the bottleneck as the last, unpooled encoder stage. Decoder stages run
/// [nearest upsample + 3x3 conv, concat skip, conv block x N, gate(emb_out)].
/// A 1x1 convolution produces the linear single-channel output.
template <typename T>
class ConditionalUNet {
 public:
  explicit ConditionalUNet(ModelConfig config);
  ~ConditionalUNet();
  ConditionalUNet(ConditionalUNet&&) noexcept;
  ConditionalUNet& operator=(ConditionalUNet&&) noexcept;

  const ModelConfig& config() const { return config_; }

  /// x is [B, 1, H, W]; embeddings are [B, D] (ignored, and may be empty, when ungated).
  /// When `cache` is non-null, activations needed by backward() are stored in it.
  Tensor<T> forward(const ParameterSet<T>& params, const Tensor<T>& x, const Tensor<T>& emb_in,
                    const Tensor<T>& emb_out, ForwardCache<T>* cache = nullptr) const;

  /// Gradients of the loss w.r.t. every parameter given dL/d(output); grads is
  /// reset to the parameter layout and overwritten.
  void backward(const ParameterSet<T>& params, const ForwardCache<T>& cache,
                const Tensor<T>& grad_output, ParameterSet<T>& grads) const;

 private:
  struct Layout;
  ModelConfig config_;
  std::unique_ptr<Layout> layout_;
};

/// Repeats one embedding vector for every sample of a batch: [batch, D].
template <typename T>
Tensor<T> batch_embedding(const ConditionEmbedding& embedding, std::size_t batch);

/// Model inference on one normalized slice: forward pass with the input-level and
/// output-level embeddings, negative outputs clamped to zero. Throws
/// ConstraintError unless level_in < level_out, LookupError if a level is missing.
ImageSlice denoise(const ParameterSet<float>& params, const ModelConfig& config,
                   const ImageSlice& slice, const CountLevel& level_in,
                   const CountLevel& level_out, const EmbeddingTable& table);

/// Ungated-model inference (the plain U-Net baseline), clamped like denoise().
ImageSlice denoise_plain(const ParameterSet<float>& params, const ModelConfig& config,
                         const ImageSlice& slice, const CountLevel& level_out);

}  // namespace petcond
