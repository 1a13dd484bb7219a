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

#include <cstddef>
#include <optional>
#include <utility>

#include "core/tensor.hpp"

namespace lipscert {

/// Per-channel affine of a normalization layer. Applied over the last axis;
/// every leading index is an independent row.
struct NormParams {
  Tensor gamma;
  Tensor beta;
  /// When set, training keeps gamma inside this range.
  std::optional<std::pair<double, double>> gamma_clamp;

  static NormParams identity(std::size_t dim);
  std::size_t dim() const { return gamma.size(); }
  void validate() const;
};

using CenterNormParams = NormParams;
using LayerNormParams = NormParams;

inline constexpr double kGammaClampMin = -2.0;
inline constexpr double kGammaClampMax = 2.0;

struct NormGrads {
  Tensor dx;
  Tensor dgamma;
  Tensor dbeta;
};

/// gamma ⊙ (D/(D−1)) (x − mean(x)) + beta, row-wise. D = 1 is rejected.
Tensor center_norm(const Tensor& x, const CenterNormParams& params);
NormGrads center_norm_vjp(const Tensor& x, const CenterNormParams& params, const Tensor& g);

/// The linear part (D/(D−1))(I − 11ᵀ/D) as a dense D×D matrix.
Tensor center_norm_operator(std::size_t dim);

struct LayerNormOptions {
  /// false: Std = 0 raises NumericError. true: Std ← max(Std, floor).
  bool guard = false;
  double floor = 1e-12;
};

/// gamma ⊙ (x − mean) / Std + beta with population Std.
Tensor layer_norm(const Tensor& x, const LayerNormParams& params, LayerNormOptions opts = {});
NormGrads layer_norm_vjp(const Tensor& x, const LayerNormParams& params, const Tensor& g,
                         LayerNormOptions opts = {});

/// ∂z/∂x for z = (x − mean)/Std of a single vector:
/// (1/Std)(I − 11ᵀ/D)(I − yyᵀ/‖y‖²) with y = x − mean.
Tensor layer_norm_jacobian(const Tensor& x);

}  // namespace lipscert
