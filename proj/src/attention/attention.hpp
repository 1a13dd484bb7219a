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

#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace lipscert {

inline constexpr double kDefaultTau = 12.0;
inline constexpr double kDefaultNu = 1.0;
inline constexpr double kDefaultEps = 1e-6;

/// One attention head. Projections are stored [D × D_h] and applied to rows.
/// nu, tau and eps only affect the cosine-similarity kind.
struct ScsaParams {
  Tensor wq, wk, wv;
  double nu = kDefaultNu;
  double tau = kDefaultTau;
  double eps = kDefaultEps;

  std::size_t in_dim() const { return wq.dim(0); }
  std::size_t head_dim() const { return wq.dim(1); }
  void validate() const;
};

/// Everything the backward pass and the Jacobian need from a forward pass.
/// For SCSA, u* are the raw projections, s* the smoothed row norms
/// sqrt(‖u‖² + ε) and q/k/v the normalized rows. For dot-product attention
/// q/k/v are the raw projections and s* are empty.
struct AttentionState {
  Tensor uq, uk, uv;
  std::vector<double> sq, sk, sv;
  Tensor q, k, v;
  Tensor p;  // [N × N], row-stochastic
};

/// ν P V with P = softmax(τ Q Kᵀ) and every row of Q, K, V scaled by
/// 1/sqrt(‖xᵢᵀW‖² + ε). x is [N × D]; output is [N × D_h].
Tensor scsa_forward(const Tensor& x, const ScsaParams& params, AttentionState* state = nullptr);

struct ScsaGrads {
  Tensor dx, dwq, dwk, dwv;
  double dnu = 0.0;
  double dtau = 0.0;
};

ScsaGrads scsa_vjp(const Tensor& x, const ScsaParams& params, const AttentionState& state,
                   const Tensor& g);

/// Full Jacobian ∂vec(out)/∂vec(x), [N·D_h × N·D], assembled block-wise from
/// the closed forms
///   J_ij = ντ Vᵀ P⁽ⁱ⁾ [E_ji Q K̃_j + δ_ij K Q̃_i] + ν P_ij Ṽ_j
/// with Q̃_i = (1/s_i)(I − u_i u_iᵀ/s_i²) W^Qᵀ (likewise K̃, Ṽ).
Tensor scsa_jacobian(const Tensor& x, const ScsaParams& params);

/// diag(p) − p pᵀ
Tensor softmax_jacobian(const Tensor& p_row);

/// Unnormalized baseline: softmax(X W^Q (X W^K)ᵀ / √D_h) X W^V.
Tensor dot_product_attention(const Tensor& x, const Tensor& wq, const Tensor& wk,
                             const Tensor& wv, AttentionState* state = nullptr);

struct DotAttentionGrads {
  Tensor dx, dwq, dwk, dwv;
};

DotAttentionGrads dot_product_attention_vjp(const Tensor& x, const Tensor& wq, const Tensor& wk,
                                            const Tensor& wv, const AttentionState& state,
                                            const Tensor& g);

enum class AttentionKind { Scsa, Dot };

std::string attention_kind_name(AttentionKind k);
AttentionKind parse_attention_kind(const std::string& s);

struct MultiHeadCache {
  std::vector<AttentionState> states;  // [sample][head], row-major
  Tensor concat;                       // scaled concatenation fed to w_out
};

/// (1/K) · concat(head outputs) · w_out. x is [N × D] or batched [B × N × D];
/// head dimensions must sum to w_out's row count.
Tensor multi_head_attention(const Tensor& x, const std::vector<ScsaParams>& heads,
                            const Tensor& w_out, AttentionKind kind,
                            MultiHeadCache* cache = nullptr);

inline Tensor multi_head_scsa(const Tensor& x, const std::vector<ScsaParams>& heads,
                              const Tensor& w_out) {
  return multi_head_attention(x, heads, w_out, AttentionKind::Scsa);
}

struct MultiHeadGrads {
  Tensor dx;
  std::vector<ScsaGrads> heads;
  Tensor dw_out;
};

MultiHeadGrads multi_head_attention_vjp(const Tensor& x, const std::vector<ScsaParams>& heads,
                                        const Tensor& w_out, AttentionKind kind,
                                        const MultiHeadCache& cache, const Tensor& g);

}  // namespace lipscert
