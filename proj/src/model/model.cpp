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

#include "model/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "core/linalg.hpp"
#include "init/init.hpp"
#include "layers/activation.hpp"

namespace lipscert {

std::string layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::PatchEmbed: return "patch_embed";
    case LayerKind::PatchMerge: return "patch_merge";
    case LayerKind::Conv: return "conv_block";
    case LayerKind::AttnResidual: return "attention_residual";
    case LayerKind::FfnResidual: return "ffn_residual";
    case LayerKind::Pool: return "global_avg_pool";
    case LayerKind::Classifier: return "classifier";
  }
  return "?";
}

Shape Layer::input_shape() const {
  if (kind == LayerKind::Classifier) return {in_dim};
  return {height, width, in_dim};
}

std::uint64_t droppath_stream(std::uint64_t step, std::size_t layer) {
  return mix64(step * 0x9E3779B97F4A7C15ULL + 0xD0C0FFEEULL) ^ (static_cast<std::uint64_t>(layer) << 1);
}

Tensor apply_norm(NormKind kind, const Tensor& x, const NormParams& p) {
  switch (kind) {
    case NormKind::CenterNorm: return center_norm(x, p);
    case NormKind::LayerNorm: return layer_norm(x, p, {.guard = true});
    case NormKind::None: return x;
  }
  return x;
}

namespace {

NormGrads norm_vjp(NormKind kind, const Tensor& x, const NormParams& p, const Tensor& g) {
  switch (kind) {
    case NormKind::CenterNorm: return center_norm_vjp(x, p, g);
    case NormKind::LayerNorm: return layer_norm_vjp(x, p, g, {.guard = true});
    case NormKind::None: break;
  }
  return NormGrads{g, Tensor(), Tensor()};
}

Tensor init_matrix(InitKind kind, std::size_t fan_in, std::size_t fan_out, RngStream& rng) {
  InitSpec spec;
  spec.kind = kind;
  spec.fan_in = fan_in;
  spec.fan_out = fan_out;
  return initialize(spec, rng);
}

// Max per-token ℓ2 norm of a channels-last activation.
double max_token_norm(const Tensor& y) {
  const std::size_t c = y.shape().back();
  double best = 0.0;
  for (std::size_t r = 0; r < y.size() / c; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += y[r * c + j] * y[r * c + j];
    best = std::max(best, s);
  }
  return std::sqrt(best);
}

}  // namespace

Model::Model(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const ModelConfig& c = config_;
  RngStream rng(c.seed, 0x6D6F64656CULL);
  const double alpha = c.resolved_alpha();
  std::size_t grid = c.image_size / c.patch_size;
  std::size_t block = 0;

  Layer embed;
  embed.kind = LayerKind::PatchEmbed;
  embed.name = "embed";
  embed.height = embed.width = c.image_size;
  embed.in_dim = c.in_channels;
  embed.out_dim = c.channels[0];
  embed.patch = c.patch_size;
  embed.weight = init_matrix(c.init_kind, c.patch_size * c.patch_size * c.in_channels,
                             c.channels[0], rng);
  embed.bias = Tensor({c.channels[0]});
  layers_.push_back(std::move(embed));

  for (std::size_t s = 0; s < c.stage_depths.size(); ++s) {
    const std::size_t ch = c.channels[s];
    const std::string stage = "stage" + std::to_string(s);
    if (s > 0) {
      Layer merge;
      merge.kind = LayerKind::PatchMerge;
      merge.name = stage + ".merge";
      merge.height = merge.width = grid;
      merge.in_dim = c.channels[s - 1];
      merge.out_dim = ch;
      merge.patch = 2;
      merge.weight = init_matrix(c.init_kind, 4 * c.channels[s - 1], ch, rng);
      merge.bias = Tensor({ch});
      layers_.push_back(std::move(merge));
      grid /= 2;
    }
    for (std::size_t b = 0; b < c.stage_depths[s]; ++b, ++block) {
      const std::string prefix = stage + ".block" + std::to_string(b);
      Layer base;
      base.height = base.width = grid;
      base.in_dim = base.out_dim = ch;
      base.block = block;

      Layer conv = base;
      conv.kind = LayerKind::Conv;
      conv.name = prefix + ".conv";
      conv.conv.dw_kernel = init_depthwise(ch, kDepthwiseKernel * kDepthwiseKernel, c.init_kind, rng);
      conv.conv.dw_bias = Tensor({ch});
      conv.conv.pw_weight = init_matrix(c.init_kind, ch, ch, rng);
      conv.conv.pw_bias = Tensor({ch});
      layers_.push_back(std::move(conv));

      base.norm_kind = c.norm_kind;
      base.placement = c.norm_placement;
      if (c.norm_kind != NormKind::None) {
        base.norm = NormParams::identity(ch);
        if (c.clamp_gamma) base.norm.gamma_clamp = std::make_pair(kGammaClampMin, kGammaClampMax);
      }
      base.wrs = WrsParams{Tensor({ch}, alpha), c.droppath};

      Layer attn = base;
      attn.kind = LayerKind::AttnResidual;
      attn.name = prefix + ".attn";
      attn.attn_kind = c.attn_kind;
      const std::size_t dh = ch / c.heads[s];
      for (std::size_t h = 0; h < c.heads[s]; ++h) {
        ScsaParams head;
        head.wq = init_matrix(c.init_kind, ch, dh, rng);
        head.wk = init_matrix(c.init_kind, ch, dh, rng);
        head.wv = init_matrix(c.init_kind, ch, dh, rng);
        head.nu = c.nu;
        head.tau = c.tau;
        head.eps = c.eps;
        attn.heads.push_back(std::move(head));
      }
      attn.w_out = init_matrix(c.init_kind, ch, ch, rng);
      layers_.push_back(std::move(attn));

      Layer ffn = base;
      ffn.kind = LayerKind::FfnResidual;
      ffn.name = prefix + ".ffn";
      const std::size_t hidden = ch * c.ffn_ratio;
      ffn.ffn.w1 = init_matrix(c.init_kind, ch, hidden, rng);
      ffn.ffn.b1 = Tensor({hidden});
      ffn.ffn.w2 = init_matrix(c.init_kind, hidden, ch, rng);
      ffn.ffn.b2 = Tensor({ch});
      ffn.ffn.act = Activation::Gelu;
      layers_.push_back(std::move(ffn));
    }
  }

  const std::size_t last = c.channels.back();
  Layer pool;
  pool.kind = LayerKind::Pool;
  pool.name = "pool";
  pool.height = pool.width = grid;
  pool.in_dim = pool.out_dim = last;
  layers_.push_back(std::move(pool));

  Layer head;
  head.kind = LayerKind::Classifier;
  head.name = "head";
  head.in_dim = last;
  head.out_dim = c.n_classes;
  head.weight = init_matrix(c.init_kind, last, c.n_classes, rng);
  head.bias = Tensor({c.n_classes});
  layers_.push_back(std::move(head));
}

Shape Model::input_shape() const {
  return {config_.image_size, config_.image_size, config_.in_channels};
}

std::vector<ParamRef> Model::parameters() {
  std::vector<ParamRef> out;
  auto add = [&](std::string name, ParamRole role, Tensor& t) {
    if (!t.empty()) out.push_back({std::move(name), role, &t, nullptr});
  };
  for (Layer& l : layers_) {
    const std::string& n = l.name;
    switch (l.kind) {
      case LayerKind::PatchEmbed:
      case LayerKind::PatchMerge:
      case LayerKind::Classifier:
        add(n + ".weight", ParamRole::Weight, l.weight);
        add(n + ".bias", ParamRole::Bias, l.bias);
        break;
      case LayerKind::Conv:
        add(n + ".dw_kernel", ParamRole::Weight, l.conv.dw_kernel);
        add(n + ".dw_bias", ParamRole::Bias, l.conv.dw_bias);
        add(n + ".pw_weight", ParamRole::Weight, l.conv.pw_weight);
        add(n + ".pw_bias", ParamRole::Bias, l.conv.pw_bias);
        break;
      case LayerKind::AttnResidual:
        for (std::size_t h = 0; h < l.heads.size(); ++h) {
          const std::string hn = n + ".head" + std::to_string(h);
          add(hn + ".wq", ParamRole::Weight, l.heads[h].wq);
          add(hn + ".wk", ParamRole::Weight, l.heads[h].wk);
          add(hn + ".wv", ParamRole::Weight, l.heads[h].wv);
          if (l.attn_kind == AttentionKind::Scsa) {
            out.push_back({hn + ".nu", ParamRole::PositiveScalar, nullptr, &l.heads[h].nu});
            out.push_back({hn + ".tau", ParamRole::PositiveScalar, nullptr, &l.heads[h].tau});
          }
        }
        add(n + ".w_out", ParamRole::Weight, l.w_out);
        break;
      case LayerKind::FfnResidual:
        add(n + ".w1", ParamRole::Weight, l.ffn.w1);
        add(n + ".b1", ParamRole::Bias, l.ffn.b1);
        add(n + ".w2", ParamRole::Weight, l.ffn.w2);
        add(n + ".b2", ParamRole::Bias, l.ffn.b2);
        break;
      case LayerKind::Pool: break;
    }
    if (l.is_residual()) {
      add(n + ".norm.gamma", ParamRole::NormScale, l.norm.gamma);
      add(n + ".norm.beta", ParamRole::NormShift, l.norm.beta);
      add(n + ".alpha", ParamRole::ResidualScale, l.wrs.alpha);
    }
  }
  return out;
}

std::size_t Model::param_count() const {
  std::size_t n = 0;
  for (const ParamRef& p : const_cast<Model*>(this)->parameters()) n += p.size();
  return n;
}

namespace {

Tensor branch_forward(const Layer& l, const Tensor& x, LayerCache* cache) {
  if (l.kind == LayerKind::AttnResidual) {
    return multi_head_attention(x, l.heads, l.w_out, l.attn_kind, cache ? &cache->attn : nullptr);
  }
  return ffn_forward(x, l.ffn, cache ? &cache->ffn : nullptr);
}

void branch_backward(const Layer& l, const Tensor& x, const LayerCache& cache, const Tensor& g,
                     Tensor& dx, GradRecord& grads) {
  const std::string& n = l.name;
  if (l.kind == LayerKind::AttnResidual) {
    MultiHeadGrads gr = multi_head_attention_vjp(x, l.heads, l.w_out, l.attn_kind, cache.attn, g);
    dx += gr.dx;
    for (std::size_t h = 0; h < l.heads.size(); ++h) {
      const std::string hn = n + ".head" + std::to_string(h);
      grads.params[hn + ".wq"] = std::move(gr.heads[h].dwq);
      grads.params[hn + ".wk"] = std::move(gr.heads[h].dwk);
      grads.params[hn + ".wv"] = std::move(gr.heads[h].dwv);
      if (l.attn_kind == AttentionKind::Scsa) {
        grads.params[hn + ".nu"] = Tensor(Shape{}, gr.heads[h].dnu);
        grads.params[hn + ".tau"] = Tensor(Shape{}, gr.heads[h].dtau);
      }
    }
    grads.params[n + ".w_out"] = std::move(gr.dw_out);
    return;
  }
  FfnGrads gr = ffn_vjp(x, l.ffn, cache.ffn, g);
  dx += gr.dx;
  grads.params[n + ".w1"] = std::move(gr.dw1);
  grads.params[n + ".b1"] = std::move(gr.db1);
  grads.params[n + ".w2"] = std::move(gr.dw2);
  grads.params[n + ".b2"] = std::move(gr.db2);
}

}  // namespace

Tensor Model::forward_layer(std::size_t index, const Tensor& x, const ForwardOptions& opts,
                            LayerCache* cache) const {
  const Layer& l = layers_[index];
  if (cache) cache->input = x;
  switch (l.kind) {
    case LayerKind::PatchEmbed:
    case LayerKind::PatchMerge:
      return patch_conv(x, l.weight, l.bias, l.patch);
    case LayerKind::Conv:
      return conv_block(x, l.conv, cache ? &cache->conv : nullptr);
    case LayerKind::AttnResidual:
    case LayerKind::FfnResidual: {
      const std::size_t batch = x.dim(0);
      const Tensor xt = x.reshaped({batch, l.height * l.width, l.in_dim});
      std::vector<std::uint8_t> keep;
      if (opts.training && l.wrs.drop_prob > 0.0) {
        RngStream rng(config_.seed, droppath_stream(opts.step, index));
        keep = droppath_mask(batch, l.wrs.drop_prob, rng);
      }
      Tensor y;
      if (l.placement == NormPlacement::Wrap) {
        Tensor f = branch_forward(l, xt, cache);
        Tensor s = wrs_combine(xt, f, l.wrs.alpha, keep);
        y = apply_norm(l.norm_kind, s, l.norm);
        if (cache) {
          cache->branch_in = xt;
          cache->branch_out = std::move(f);
          cache->norm_in = std::move(s);
        }
      } else if (l.placement == NormPlacement::Pre) {
        Tensor n = apply_norm(l.norm_kind, xt, l.norm);
        Tensor f = branch_forward(l, n, cache);
        y = wrs_combine(xt, f, l.wrs.alpha, keep);
        if (cache) {
          cache->norm_in = xt;
          cache->branch_in = std::move(n);
          cache->branch_out = std::move(f);
        }
      } else {
        Tensor f = branch_forward(l, xt, cache);
        Tensor n = apply_norm(l.norm_kind, f, l.norm);
        y = wrs_combine(xt, n, l.wrs.alpha, keep);
        if (cache) {
          cache->branch_in = xt;
          cache->norm_in = std::move(f);
          cache->branch_out = std::move(n);
        }
      }
      if (cache) cache->keep = std::move(keep);
      y.reshape(x.shape());
      return y;
    }
    case LayerKind::Pool: {
      const std::size_t batch = x.dim(0), n = l.height * l.width, c = l.in_dim;
      Tensor y({batch, c});
      const double inv = 1.0 / static_cast<double>(n);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < n; ++t)
          for (std::size_t j = 0; j < c; ++j) y(b, j) += inv * x[(b * n + t) * c + j];
      return y;
    }
    case LayerKind::Classifier:
      return affine(x, l.weight, l.bias);
  }
  return x;
}

Tensor Model::forward(const Tensor& x, const ForwardOptions& opts) const {
  const Shape in = input_shape();
  const bool single = x.shape() == in;
  Tensor h = x;
  if (single) {
    Shape batched{1};
    batched.insert(batched.end(), in.begin(), in.end());
    h.reshape(batched);
  } else if (x.rank() != 4 || Shape(x.shape().begin() + 1, x.shape().end()) != in) {
    throw DimensionError("model input " + shape_str(x.shape()) + " does not match image shape " +
                         shape_str(in));
  }
  if (opts.tape) opts.tape->layers.assign(layers_.size(), LayerCache{});
  double max_act = 0.0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = forward_layer(i, h, opts, opts.tape ? &opts.tape->layers[i] : nullptr);
    if (opts.max_act && layers_[i].kind != LayerKind::Pool &&
        layers_[i].kind != LayerKind::Classifier) {
      max_act = std::max(max_act, max_token_norm(h));
    }
  }
  if (opts.max_act) *opts.max_act = max_act;
  if (single) h.reshape({config_.n_classes});
  return h;
}

Tensor Model::forward_range(const Tensor& x, std::size_t first, std::size_t last) const {
  if (first >= last || last > layers_.size()) throw std::out_of_range("forward_range: bad range");
  const Shape in = layers_[first].input_shape();
  const bool single = x.shape() == in;
  Tensor h = x;
  if (single) {
    Shape batched{1};
    batched.insert(batched.end(), in.begin(), in.end());
    h.reshape(batched);
  }
  ForwardOptions opts;
  for (std::size_t i = first; i < last; ++i) h = forward_layer(i, h, opts, nullptr);
  if (single) h.reshape(Shape(h.shape().begin() + 1, h.shape().end()));
  return h;
}

void Model::backward_layer(std::size_t index, const LayerCache& cache, const Tensor& g, Tensor& dx,
                           GradRecord& grads) const {
  const Layer& l = layers_[index];
  const std::string& n = l.name;
  switch (l.kind) {
    case LayerKind::PatchEmbed:
    case LayerKind::PatchMerge: {
      PatchConvGrads gr = patch_conv_vjp(cache.input, l.weight, true, l.patch, g);
      dx = std::move(gr.dx);
      grads.params[n + ".weight"] = std::move(gr.dweight);
      grads.params[n + ".bias"] = std::move(gr.dbias);
      return;
    }
    case LayerKind::Conv: {
      ConvBlockGrads gr = conv_block_vjp(cache.input, l.conv, cache.conv, g);
      dx = std::move(gr.dx);
      grads.params[n + ".dw_kernel"] = std::move(gr.ddw_kernel);
      grads.params[n + ".dw_bias"] = std::move(gr.ddw_bias);
      grads.params[n + ".pw_weight"] = std::move(gr.dpw_weight);
      grads.params[n + ".pw_bias"] = std::move(gr.dpw_bias);
      return;
    }
    case LayerKind::AttnResidual:
    case LayerKind::FfnResidual: {
      const Tensor gt = g.reshaped(cache.branch_out.shape());
      NormGrads ng;
      WrsGrads wg;
      if (l.placement == NormPlacement::Wrap) {
        ng = norm_vjp(l.norm_kind, cache.norm_in, l.norm, gt);
        wg = wrs_vjp(cache.branch_out, l.wrs.alpha, cache.keep, ng.dx);
        dx = std::move(wg.dx);
        branch_backward(l, cache.branch_in, cache, wg.df, dx, grads);
      } else if (l.placement == NormPlacement::Pre) {
        wg = wrs_vjp(cache.branch_out, l.wrs.alpha, cache.keep, gt);
        dx = std::move(wg.dx);
        Tensor dn(cache.branch_in.shape());
        branch_backward(l, cache.branch_in, cache, wg.df, dn, grads);
        ng = norm_vjp(l.norm_kind, cache.norm_in, l.norm, dn);
        dx += ng.dx;
      } else {
        wg = wrs_vjp(cache.branch_out, l.wrs.alpha, cache.keep, gt);
        dx = std::move(wg.dx);
        ng = norm_vjp(l.norm_kind, cache.norm_in, l.norm, wg.df);
        branch_backward(l, cache.branch_in, cache, ng.dx, dx, grads);
      }
      if (l.norm_kind != NormKind::None) {
        grads.params[n + ".norm.gamma"] = std::move(ng.dgamma);
        grads.params[n + ".norm.beta"] = std::move(ng.dbeta);
      }
      grads.params[n + ".alpha"] = std::move(wg.dalpha);
      dx.reshape(cache.input.shape());
      return;
    }
    case LayerKind::Pool: {
      const std::size_t batch = g.dim(0), tokens = l.height * l.width, c = l.in_dim;
      dx = Tensor(cache.input.shape());
      const double inv = 1.0 / static_cast<double>(tokens);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < tokens; ++t)
          for (std::size_t j = 0; j < c; ++j) dx[(b * tokens + t) * c + j] = inv * g(b, j);
      return;
    }
    case LayerKind::Classifier: {
      AffineGrads gr = affine_vjp(cache.input, l.weight, true, g);
      dx = std::move(gr.dx);
      grads.params[n + ".weight"] = std::move(gr.dw);
      grads.params[n + ".bias"] = std::move(gr.db);
      return;
    }
  }
}

GradRecord Model::backward(const Tape& tape, const Tensor& dlogits) const {
  if (tape.layers.size() != layers_.size()) throw std::logic_error("backward: tape does not match model");
  GradRecord grads;
  Tensor g = dlogits;
  if (g.rank() == 1) g.reshape({1, g.size()});
  for (std::size_t i = layers_.size(); i-- > 0;) {
    Tensor dx;
    backward_layer(i, tape.layers[i], g, dx, grads);
    g = std::move(dx);
  }
  const Shape in = input_shape();
  if (dlogits.rank() == 1) g.reshape(in);
  grads.input = std::move(g);
  return grads;
}

LossResult cross_entropy(const Tensor& logits, const std::vector<int>& labels, double smoothing) {
  require_rank(logits, 2, "cross_entropy");
  const std::size_t batch = logits.rows(), k = logits.cols();
  if (labels.size() != batch) throw DimensionError("cross_entropy: label count");
  LossResult out;
  out.dlogits = Tensor(logits.shape());
  const double off = smoothing / static_cast<double>(k);
  const double on = 1.0 - smoothing + off;
  std::vector<double> p(k);
  for (std::size_t b = 0; b < batch; ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= k) throw std::out_of_range("cross_entropy: label");
    double mx = logits(b, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits(b, j));
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(logits(b, j) - mx);
    const double logz = mx + std::log(z);
    for (std::size_t j = 0; j < k; ++j) {
      const double t = static_cast<std::size_t>(y) == j ? on : off;
      const double logp = logits(b, j) - logz;
      out.loss -= t * logp;
      out.dlogits(b, j) = (std::exp(logp) - t) / static_cast<double>(batch);
    }
  }
  out.loss /= static_cast<double>(batch);
  return out;
}

}  // namespace lipscert
