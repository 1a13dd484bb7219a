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
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace lipscert {

/// Weighted residual shortcut x + α ⊙ f(x) with DropPath probability p.
/// α runs along the last (channel) axis.
struct WrsParams {
  Tensor alpha;
  double drop_prob = 0.0;

  void validate() const;
};

/// One sample. Training: with probability p the branch is dropped and x is
/// returned; otherwise x + α ⊙ f_out. Kept branches are not rescaled by
/// 1/(1−p). Inference always returns x + α ⊙ f_out.
Tensor wrs_forward(const Tensor& x, const Tensor& f_out, const WrsParams& params, bool training,
                   RngStream& rng);

/// Batched form: axis 0 indexes samples, keep[b] selects the branch per
/// sample. An empty keep vector keeps every branch.
Tensor wrs_combine(const Tensor& x, const Tensor& f_out, const Tensor& alpha,
                   const std::vector<std::uint8_t>& keep);

struct WrsGrads {
  Tensor dx;
  Tensor df;
  Tensor dalpha;
};

WrsGrads wrs_vjp(const Tensor& f_out, const Tensor& alpha, const std::vector<std::uint8_t>& keep,
                 const Tensor& g);

/// Per-sample keep mask drawn from rng: keep[b] = (uniform ≥ p).
std::vector<std::uint8_t> droppath_mask(std::size_t batch, double p, RngStream& rng);

}  // namespace lipscert
