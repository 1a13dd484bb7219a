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
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "attention/attention.hpp"
#include "core/linalg.hpp"
#include "core/rng.hpp"
#include "layers/affine.hpp"
#include "layers/conv.hpp"
#include "layers/norm.hpp"
#include "model/model.hpp"

namespace lipscert {

/// Raised when a layer has no finite Lipschitz constant (LayerNorm,
/// dot-product attention). The message names the layer kind.
class NonLipschitzError : public std::runtime_error {
 public:
  explicit NonLipschitzError(const std::string& kind)
      : std::runtime_error("non-Lipschitz layer: " + kind), kind_(kind) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

/// An upper bound with its breakdown. For form "sum" the value is the sum of
/// the terms; for "product" it is their product.
struct LipschitzBound {
  PNorm p = PNorm::Two;
  double value = 0.0;
  std::string form = "product";
  std::vector<std::pair<std::string, double>> terms;
  std::vector<std::string> assumptions;

  double term(const std::string& name) const;
};

/// Spectral norm accurate enough to serve inside an upper bound.
double certified_spectral_norm(const Tensor& w);

/// Norm of x ↦ x·W (W stored [in × out]): σmax(W) for p = 2, the largest
/// absolute column sum of the stored W for p = ∞.
LipschitzBound affine_bound(const Tensor& w, PNorm p);

/// Single-head SCSA over n tokens; D in the formulas is the head dimension.
///   ∞: N²√D ντ ε^-½ ‖W^K‖∞ + N√D ντ ε^-½ ‖W^Q‖∞ + 2N ν ε^-½ ‖W^V⊤‖∞
///   2: 2N(N−1) ντ ε^-½ ‖W^K‖₂ + 2(N−1) ντ ε^-½ ‖W^Q‖₂ + 2N ν ε^-½ ‖W^V⊤‖₂
LipschitzBound scsa_bound_inf(const ScsaParams& params, std::size_t n);
LipschitzBound scsa_bound_2(const ScsaParams& params, std::size_t n);
LipschitzBound scsa_bound(const ScsaParams& params, std::size_t n, PNorm p);

/// (1/K) Σ_h Lip(head_h) · Lip(w_out). Dot-product heads are refused.
LipschitzBound multi_head_bound(const std::vector<ScsaParams>& heads, const Tensor& w_out,
                                std::size_t n, PNorm p, AttentionKind kind = AttentionKind::Scsa);

/// D/(D−1)·max|γ| for p = 2 and 2·max|γ| for p = ∞.
LipschitzBound center_norm_bound(const NormParams& params, PNorm p);

/// Lip(w1) · Lip(act) · Lip(w2).
LipschitzBound ffn_bound(const FfnParams& p, PNorm norm);

/// Depthwise (max_c ‖k_c‖₁ for p = 2, exact for p = ∞) times pointwise.
LipschitzBound conv_block_bound(const ConvBlockParams& p, std::size_t height, std::size_t width,
                                PNorm norm);

/// Lipschitz bound of one model layer at its current parameters.
LipschitzBound layer_bound(const Layer& layer, PNorm p);

/// Inputs to the residual-product bound. Residual unit i has shortcut weight
/// alpha[i] and branch constant lip[i]; stage_blocks lists how many units
/// each stage holds.
struct NetworkBoundInputs {
  std::vector<std::size_t> stage_blocks;
  std::vector<double> alpha;
  std::vector<double> lip;
  double droppath = 0.0;

  double kappa() const;
  void validate() const;
};

/// Π(1 + α_i Lip(f_i)) with the relaxations exp(Σ α_i Lip(f_i)) and
/// exp(κ Σ α_i); the last equals exp(κ) when the α_i sum to 1.
LipschitzBound network_bound(const NetworkBoundInputs& in);

enum class DropPathMode { Expected, Worst, Sampled };

std::string droppath_mode_name(DropPathMode m);

/// Worst: nothing dropped. Expected: Π(1 + (1−p) α_i L_i). Sampled: each
/// factor collapses to 1 with probability p.
LipschitzBound droppath_bound(const NetworkBoundInputs& in, DropPathMode mode, RngStream& rng);

/// Residual units of a model in order, with their current α and branch
/// bounds.
NetworkBoundInputs network_inputs(const Model& model, PNorm p);

}  // namespace lipscert
