// Copyright 2026 The lipscert Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "attention/attention.hpp"
#include "autodiff/gradcheck.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "layers/affine.hpp"
#include "layers/conv.hpp"
#include "layers/norm.hpp"
#include "layers/residual.hpp"
#include "model/config.hpp"

namespace lipscert {

enum class LayerKind { PatchEmbed, PatchMerge, Conv, AttnResidual, FfnResidual, Pool, Classifier };

std::string layer_kind_name(LayerKind k);

/// One entry of the model's flat composition. Only the fields relevant to
/// `kind` are populated. Activations between layers are channels-last grids
/// [B, H, W, C] until the pool, then [B, C].
struct Layer {
  LayerKind kind = LayerKind::Conv;
  std::string name;
  std::size_t height = 0;  // input grid
  std::size_t width = 0;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::size_t patch = 0;   // embed and merge stride
  std::size_t block = 0;   // residual index across the network

  Tensor weight, bias;     // embed, merge, classifier: [in·patch², out]
  ConvBlockParams conv;
  std::vector<ScsaParams> heads;
  Tensor w_out;
  FfnParams ffn;
  NormParams norm;
  WrsParams wrs;
  NormKind norm_kind = NormKind::CenterNorm;
  NormPlacement placement = NormPlacement::Wrap;
  AttentionKind attn_kind = AttentionKind::Scsa;

  bool is_residual() const {
    return kind == LayerKind::AttnResidual || kind == LayerKind::FfnResidual;
  }
  /// Per-sample input shape.
  Shape input_shape() const;
};

enum class ParamRole { Weight, Bias, NormScale, NormShift, ResidualScale, PositiveScalar };

/// Handle to one trainable quantity. Exactly one of tensor / scalar is set.
/// Positive scalars (ν, τ) are optimized as log values.
struct ParamRef {
  std::string name;
  ParamRole role;
  Tensor* tensor = nullptr;
  double* scalar = nullptr;

  std::size_t size() const { return tensor ? tensor->size() : 1; }
};

/// Per-layer intermediates recorded by a training or gradient forward pass.
struct LayerCache {
  Tensor input;
  ConvBlockCache conv;
  MultiHeadCache attn;
  FfnCache ffn;
  Tensor branch_in;   // input to f
  Tensor branch_out;  // f output
  Tensor norm_in;     // input to the normalization
  std::vector<std::uint8_t> keep;
};

struct Tape {
  std::vector<LayerCache> layers;
};

struct ForwardOptions {
  bool training = false;
  std::uint64_t step = 0;     // selects DropPath masks
  Tape* tape = nullptr;
  double* max_act = nullptr;  // receives the largest per-token ℓ2 norm
};

class Model {
 public:
  /// Builds and initializes from config.seed.
  explicit Model(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  /// [H, W, C] of one input image.
  Shape input_shape() const;

  std::vector<ParamRef> parameters();
  std::size_t param_count() const;

  /// x is [B, H, W, C] (or one image [H, W, C]); returns logits [B, classes]
  /// (or [classes]).
  Tensor forward(const Tensor& x, const ForwardOptions& opts = {}) const;

  /// Reverse pass over a tape filled by forward(). Keys match parameters().
  GradRecord backward(const Tape& tape, const Tensor& dlogits) const;

  /// Runs layers [first, last) on an activation in that range's layout.
  Tensor forward_range(const Tensor& x, std::size_t first, std::size_t last) const;

 private:
  Tensor forward_layer(std::size_t index, const Tensor& x, const ForwardOptions& opts,
                       LayerCache* cache) const;
  void backward_layer(std::size_t index, const LayerCache& cache, const Tensor& g, Tensor& dx,
                      GradRecord& grads) const;

  ModelConfig config_;
  std::vector<Layer> layers_;
};

/// Stream id for the DropPath mask of one residual layer at one step.
std::uint64_t droppath_stream(std::uint64_t step, std::size_t layer);

struct LossResult {
  double loss = 0.0;
  Tensor dlogits;  // ∂loss/∂logits, averaged over the batch
};

/// Mean cross-entropy against (1 − s)·onehot + s/K targets.
LossResult cross_entropy(const Tensor& logits, const std::vector<int>& labels, double smoothing);

/// Applies the configured normalization (LayerNorm runs guarded).
Tensor apply_norm(NormKind kind, const Tensor& x, const NormParams& p);

}  // namespace lipscert
