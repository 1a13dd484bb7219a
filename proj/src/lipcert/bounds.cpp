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

#include "lipcert/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "init/init.hpp"
#include "layers/activation.hpp"

namespace lipscert {

double LipschitzBound::term(const std::string& name) const {
  for (const auto& [k, v] : terms) {
    if (k == name) return v;
  }
  throw std::out_of_range("bound has no term '" + name + "'");
}

namespace {

LipschitzBound product(PNorm p, std::vector<std::pair<std::string, double>> terms) {
  LipschitzBound b;
  b.p = p;
  b.form = "product";
  b.value = 1.0;
  for (const auto& t : terms) b.value *= t.second;
  b.terms = std::move(terms);
  return b;
}

double weight_norm(const Tensor& w, PNorm p) {
  require_rank(w, 2, "weight norm");
  return p == PNorm::Two ? certified_spectral_norm(w) : inf_norm(transpose(w));
}

double max_abs_or(const Tensor& t, double fallback) { return t.empty() ? fallback : max_abs(t); }

void check_scsa(const ScsaParams& params) {
  params.validate();
  if (!(params.eps > 0.0)) throw std::invalid_argument("scsa bound: eps must be > 0");
  if (!(params.nu >= 0.0) || !(params.tau >= 0.0)) throw std::invalid_argument("scsa bound: nu and tau must be >= 0");
}

}  // namespace

double certified_spectral_norm(const Tensor& w) {
  return spectral_norm(w, kSpectralInitIters, kSpectralInitTol);
}

LipschitzBound affine_bound(const Tensor& w, PNorm p) {
  return product(p, {{"weight", weight_norm(w, p)}});
}

LipschitzBound scsa_bound_inf(const ScsaParams& params, std::size_t n) {
  check_scsa(params);
  const double nn = static_cast<double>(n);
  const double dh = static_cast<double>(params.head_dim());
  const double c = params.nu * params.tau / std::sqrt(params.eps);
  LipschitzBound b;
  b.p = PNorm::Inf;
  b.form = "sum";
  // ‖W^K‖∞ and ‖W^Q‖∞ act on the stored [D × D_h] layout; W^V enters through
  // its transpose.
  b.terms = {{"key", nn * nn * std::sqrt(dh) * c * inf_norm(params.wk)},
             {"query", nn * std::sqrt(dh) * c * inf_norm(params.wq)},
             {"value", 2.0 * nn * params.nu / std::sqrt(params.eps) * inf_norm(transpose(params.wv))}};
  for (const auto& t : b.terms) b.value += t.second;
  return b;
}

LipschitzBound scsa_bound_2(const ScsaParams& params, std::size_t n) {
  check_scsa(params);
  const double nn = static_cast<double>(n);
  const double c = params.nu * params.tau / std::sqrt(params.eps);
  LipschitzBound b;
  b.p = PNorm::Two;
  b.form = "sum";
  b.terms = {{"key", 2.0 * nn * (nn - 1.0) * c * certified_spectral_norm(params.wk)},
             {"query", 2.0 * (nn - 1.0) * c * certified_spectral_norm(params.wq)},
             {"value", 2.0 * nn * params.nu / std::sqrt(params.eps) * certified_spectral_norm(params.wv)}};
  for (const auto& t : b.terms) b.value += t.second;
  return b;
}

LipschitzBound scsa_bound(const ScsaParams& params, std::size_t n, PNorm p) {
  return p == PNorm::Two ? scsa_bound_2(params, n) : scsa_bound_inf(params, n);
}

LipschitzBound multi_head_bound(const std::vector<ScsaParams>& heads, const Tensor& w_out,
                                std::size_t n, PNorm p, AttentionKind kind) {
  if (kind == AttentionKind::Dot) throw NonLipschitzError("dot_product_attention");
  if (heads.empty()) throw DimensionError("multi_head_bound: no heads");
  double sum = 0.0;
  std::vector<std::pair<std::string, double>> terms;
  for (std::size_t h = 0; h < heads.size(); ++h) {
    const double v = scsa_bound(heads[h], n, p).value;
    terms.emplace_back("head" + std::to_string(h), v);
    sum += v;
  }
  LipschitzBound b = product(p, {{"heads_mean", sum / static_cast<double>(heads.size())},
                                 {"w_out", weight_norm(w_out, p)}});
  b.terms.insert(b.terms.end(), terms.begin(), terms.end());
  b.assumptions.push_back("heads_mean = (1/K) * sum of head terms; head terms are not factors");
  return b;
}

LipschitzBound center_norm_bound(const NormParams& params, PNorm p) {
  const double d = static_cast<double>(params.dim());
  if (params.dim() < 2) throw DimensionError("center_norm_bound: D must be >= 2");
  const double scale = p == PNorm::Two ? d / (d - 1.0) : 2.0;
  return product(p, {{"center", scale}, {"gamma_max", max_abs_or(params.gamma, 1.0)}});
}

LipschitzBound ffn_bound(const FfnParams& p, PNorm norm) {
  return product(norm, {{"w1", weight_norm(p.w1, norm)},
                        {"activation", activation_lipschitz(p.act)},
                        {"w2", weight_norm(p.w2, norm)}});
}

LipschitzBound conv_block_bound(const ConvBlockParams& p, std::size_t height, std::size_t width,
                                PNorm norm) {
  double dw = 0.0;
  if (norm == PNorm::Two) {
    const std::size_t taps = p.dw_kernel.dim(1);
    for (std::size_t c = 0; c < p.dw_kernel.dim(0); ++c) {
      double s = 0.0;
      for (std::size_t t = 0; t < taps; ++t) s += std::abs(p.dw_kernel(c, t));
      dw = std::max(dw, s);
    }
  } else {
    dw = depthwise_inf_norm(p.dw_kernel, height, width);
  }
  return product(norm, {{"depthwise", dw}, {"pointwise", weight_norm(p.pw_weight, norm)}});
}

namespace {

double norm_lipschitz(const Layer& l, PNorm p) {
  switch (l.norm_kind) {
    case NormKind::CenterNorm: return center_norm_bound(l.norm, p).value;
    case NormKind::LayerNorm: throw NonLipschitzError("layer_norm");
    case NormKind::None: return 1.0;
  }
  return 1.0;
}

double branch_lipschitz(const Layer& l, PNorm p) {
  if (l.kind == LayerKind::AttnResidual) {
    return multi_head_bound(l.heads, l.w_out, l.height * l.width, p, l.attn_kind).value;
  }
  return ffn_bound(l.ffn, p).value;
}

}  // namespace

LipschitzBound layer_bound(const Layer& l, PNorm p) {
  switch (l.kind) {
    case LayerKind::PatchEmbed:
    case LayerKind::PatchMerge:
    case LayerKind::Classifier:
      return affine_bound(l.weight, p);
    case LayerKind::Conv:
      return conv_block_bound(l.conv, l.height, l.width, p);
    case LayerKind::AttnResidual:
    case LayerKind::FfnResidual: {
      const double norm = norm_lipschitz(l, p);
      const double branch = branch_lipschitz(l, p);
      const double alpha = max_abs(l.wrs.alpha);
      LipschitzBound b;
      b.p = p;
      b.form = "product";
      b.terms = {{"norm", norm}, {"branch", branch}, {"alpha_max", alpha}};
      switch (l.placement) {
        case NormPlacement::Wrap:
          b.value = norm * (1.0 + alpha * branch);
          b.assumptions.push_back("value = norm * (1 + alpha_max * branch)");
          break;
        case NormPlacement::Pre:
        case NormPlacement::Branch:
          b.value = 1.0 + alpha * branch * norm;
          b.assumptions.push_back("value = 1 + alpha_max * branch * norm");
          break;
      }
      return b;
    }
    case LayerKind::Pool: {
      const double n = static_cast<double>(l.height * l.width);
      return product(p, {{"mean", p == PNorm::Two ? 1.0 / std::sqrt(n) : 1.0}});
    }
  }
  throw std::logic_error("layer_bound: unknown layer kind");
}

double NetworkBoundInputs::kappa() const {
  double k = 0.0;
  for (double v : lip) k = std::max(k, v);
  return k;
}

void NetworkBoundInputs::validate() const {
  if (alpha.size() != lip.size()) throw DimensionError("network bound: alpha and lip lengths differ");
  std::size_t total = 0;
  for (std::size_t m : stage_blocks) total += m;
  if (!stage_blocks.empty() && total != lip.size()) {
    throw DimensionError("network bound: stage block counts do not sum to the unit count");
  }
  for (double v : lip) {
    if (!(v >= 0.0)) throw std::invalid_argument("network bound: Lip(f) must be >= 0");
  }
  for (double a : alpha) {
    if (!(a >= 0.0)) throw std::invalid_argument("network bound: alpha must be >= 0");
  }
  if (!(droppath >= 0.0 && droppath <= 1.0)) throw std::invalid_argument("network bound: p must lie in [0, 1]");
}

LipschitzBound network_bound(const NetworkBoundInputs& in) {
  in.validate();
  LipschitzBound b;
  b.p = PNorm::Two;
  b.form = "product";
  b.value = 1.0;
  double exponent = 0.0, alpha_sum = 0.0;
  for (std::size_t i = 0; i < in.lip.size(); ++i) {
    const double f = 1.0 + in.alpha[i] * in.lip[i];
    b.value *= f;
    exponent += in.alpha[i] * in.lip[i];
    alpha_sum += in.alpha[i];
    b.terms.emplace_back("unit" + std::to_string(i), f);
  }
  b.terms.emplace_back("exp_sum", std::exp(exponent));
  b.terms.emplace_back("exp_kappa", std::exp(in.kappa() * alpha_sum));
  b.assumptions.push_back("value = product of unit factors; exp_sum and exp_kappa are relaxations");
  return b;
}

std::string droppath_mode_name(DropPathMode m) {
  switch (m) {
    case DropPathMode::Expected: return "expected";
    case DropPathMode::Worst: return "worst";
    case DropPathMode::Sampled: return "sampled";
  }
  return "?";
}

LipschitzBound droppath_bound(const NetworkBoundInputs& in, DropPathMode mode, RngStream& rng) {
  in.validate();
  LipschitzBound b;
  b.form = "product";
  b.value = 1.0;
  for (std::size_t i = 0; i < in.lip.size(); ++i) {
    double a = in.alpha[i] * in.lip[i];
    if (mode == DropPathMode::Expected) a *= 1.0 - in.droppath;
    if (mode == DropPathMode::Sampled && rng.bernoulli(in.droppath)) a = 0.0;
    b.terms.emplace_back("unit" + std::to_string(i), 1.0 + a);
    b.value *= 1.0 + a;
  }
  b.assumptions.push_back("droppath mode " + droppath_mode_name(mode));
  return b;
}

NetworkBoundInputs network_inputs(const Model& model, PNorm p) {
  NetworkBoundInputs in;
  in.droppath = model.config().droppath;
  std::string stage;
  for (const Layer& l : model.layers()) {
    if (!l.is_residual()) continue;
    const std::string s = l.name.substr(0, l.name.find('.'));
    if (s != stage) {
      in.stage_blocks.push_back(0);
      stage = s;
    }
    ++in.stage_blocks.back();
    const double branch = branch_lipschitz(l, p);
    in.lip.push_back(l.placement == NormPlacement::Wrap ? branch : branch * norm_lipschitz(l, p));
    in.alpha.push_back(max_abs(l.wrs.alpha));
  }
  return in;
}

}  // namespace lipscert
