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

#include "core/tensor.hpp"

namespace lipscert {

// Images are channels-last: [H, W, C] or batched [B, H, W, C]. A batched
// token matrix [B, H·W, C] has the same memory layout, so callers reshape
// freely between the two.

inline constexpr std::size_t kDepthwiseKernel = 7;

/// Depthwise k×k convolution, stride 1, zero padding k/2. kernel is [C, k·k]
/// with taps in (ky, kx) row-major order; bias is [C] or empty.
Tensor depthwise_conv(const Tensor& x, const Tensor& kernel, const Tensor& bias);

struct DepthwiseGrads {
  Tensor dx, dkernel, dbias;
};

DepthwiseGrads depthwise_conv_vjp(const Tensor& x, const Tensor& kernel, bool has_bias,
                                  const Tensor& g);

/// Exact ℓ∞ operator norm of the depthwise map on an H×W grid: the largest
/// in-bounds absolute tap sum over channels and output positions.
double depthwise_inf_norm(const Tensor& kernel, std::size_t height, std::size_t width);

/// Non-overlapping k×k patches: [B, H, W, C] → [B, H/k · W/k, k·k·C], with
/// each patch flattened as (ky, kx, c).
Tensor patchify(const Tensor& x, std::size_t k);
/// Inverse of patchify given the original image shape.
Tensor unpatchify(const Tensor& patches, const Shape& image_shape, std::size_t k);

/// k×k stride-k convolution; weight is [k·k·C_in, C_out]. Output is
/// [B, H/k, W/k, C_out] (rank 3 input gives rank 3 output).
Tensor patch_conv(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t k);

struct PatchConvGrads {
  Tensor dx, dweight, dbias;
};

PatchConvGrads patch_conv_vjp(const Tensor& x, const Tensor& weight, bool has_bias,
                              std::size_t k, const Tensor& g);

/// Depthwise 7×7 followed by pointwise 1×1.
struct ConvBlockParams {
  Tensor dw_kernel;  // [C, 49]
  Tensor dw_bias;    // [C]
  Tensor pw_weight;  // [C, C_out]
  Tensor pw_bias;    // [C_out]

  std::size_t in_channels() const { return dw_kernel.dim(0); }
  std::size_t out_channels() const { return pw_weight.dim(1); }
  void validate() const;
};

struct ConvBlockCache {
  Tensor mid;  // depthwise output
};

Tensor conv_block(const Tensor& x, const ConvBlockParams& p, ConvBlockCache* cache = nullptr);

struct ConvBlockGrads {
  Tensor dx, ddw_kernel, ddw_bias, dpw_weight, dpw_bias;
};

ConvBlockGrads conv_block_vjp(const Tensor& x, const ConvBlockParams& p,
                              const ConvBlockCache& cache, const Tensor& g);

}  // namespace lipscert
