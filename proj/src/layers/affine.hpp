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

#include "core/tensor.hpp"
#include "layers/activation.hpp"

namespace lipscert {

/// y = Wᵀx + b on the last axis. W is stored [in × out]; an empty bias means
/// no bias.
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);

struct AffineGrads {
  Tensor dx;
  Tensor dw;
  Tensor db;  // empty when the layer has no bias
};

AffineGrads affine_vjp(const Tensor& x, const Tensor& w, bool has_bias, const Tensor& g);

/// Two-layer feed-forward: affine, activation, affine.
struct FfnParams {
  Tensor w1, b1, w2, b2;
  Activation act = Activation::Gelu;

  std::size_t in_dim() const { return w1.dim(0); }
  std::size_t hidden_dim() const { return w1.dim(1); }
};

struct FfnCache {
  Tensor pre;  // w1ᵀx + b1
};

Tensor ffn_forward(const Tensor& x, const FfnParams& p, FfnCache* cache = nullptr);

struct FfnGrads {
  Tensor dx, dw1, db1, dw2, db2;
};

FfnGrads ffn_vjp(const Tensor& x, const FfnParams& p, const FfnCache& cache, const Tensor& g);

}  // namespace lipscert
