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

#include "autodiff/registry.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "attention/attention.hpp"
#include "core/rng.hpp"
#include "init/init.hpp"
#include "layers/activation.hpp"
#include "layers/affine.hpp"
#include "layers/conv.hpp"
#include "layers/norm.hpp"
#include "layers/residual.hpp"
#include "model/weights.hpp"

namespace lipscert {

namespace {

constexpr double kReluMargin = 1e-3;

Tensor normal(const Shape& s, RngStream& rng, double scale = 1.0) {
  Tensor t(s);
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

Tensor scalar(double v) { return Tensor(Shape{}, v); }

DiffOp activation_op(Activation kind, std::size_t n, std::size_t d, RngStream& rng) {
  DiffOp op;
  op.name = activation_name(kind);
  op.arg_names = {"x"};
  op.args = {normal({n, d}, rng)};
  op.forward = [kind](const DiffOp::Args& a) { return activation(kind, a[0]); };
  op.vjp = [kind](const DiffOp::Args& a, const Tensor& g) {
    return GradRecord{activation_vjp(kind, a[0], g), {}};
  };
  if (kind == Activation::Relu) {
    op.exclude = [](const DiffOp::Args& a, std::size_t arg, std::size_t c) {
      return arg == 0 && std::abs(a[0][c]) <= kReluMargin;
    };
  }
  return op;
}

DiffOp norm_op(bool center, std::size_t n, std::size_t d, RngStream& rng) {
  DiffOp op;
  op.name = center ? "centernorm" : "layernorm";
  op.arg_names = {"x", "gamma", "beta"};
  op.args = {normal({n, d}, rng), normal({d}, rng), normal({d}, rng)};
  auto params = [](const DiffOp::Args& a) { return NormParams{a[1], a[2], std::nullopt}; };
  op.forward = [center, params](const DiffOp::Args& a) {
    return center ? center_norm(a[0], params(a)) : layer_norm(a[0], params(a));
  };
  op.vjp = [center, params](const DiffOp::Args& a, const Tensor& g) {
    NormGrads r = center ? center_norm_vjp(a[0], params(a), g) : layer_norm_vjp(a[0], params(a), g);
    return GradRecord{std::move(r.dx), {{"gamma", std::move(r.dgamma)}, {"beta", std::move(r.dbeta)}}};
  };
  return op;
}

ScsaParams head_from(const DiffOp::Args& a, std::size_t at) {
  ScsaParams p;
  p.wq = a[at];
  p.wk = a[at + 1];
  p.wv = a[at + 2];
  p.nu = a[at + 3][0];
  p.tau = a[at + 4][0];
  return p;
}

void add_head(DiffOp& op, const std::string& prefix, std::size_t d, std::size_t dh, RngStream& rng) {
  for (const char* w : {"wq", "wk", "wv"}) {
    op.arg_names.push_back(prefix + w);
    op.args.push_back(spectral_init({d, dh}, rng));
  }
  op.arg_names.push_back(prefix + "nu");
  op.args.push_back(scalar(kDefaultNu));
  op.arg_names.push_back(prefix + "tau");
  op.args.push_back(scalar(kDefaultTau));
}

void put_head_grads(GradRecord& r, const std::string& prefix, ScsaGrads& g) {
  r.params[prefix + "wq"] = std::move(g.dwq);
  r.params[prefix + "wk"] = std::move(g.dwk);
  r.params[prefix + "wv"] = std::move(g.dwv);
  r.params[prefix + "nu"] = scalar(g.dnu);
  r.params[prefix + "tau"] = scalar(g.dtau);
}

DiffOp scsa_op(std::size_t n, std::size_t d, RngStream& rng) {
  DiffOp op;
  op.name = "scsa";
  op.arg_names = {"x"};
  op.args = {normal({n, d}, rng)};
  add_head(op, "", d, d, rng);
  op.forward = [](const DiffOp::Args& a) { return scsa_forward(a[0], head_from(a, 1)); };
  op.vjp = [](const DiffOp::Args& a, const Tensor& g) {
    const ScsaParams p = head_from(a, 1);
    AttentionState st;
    scsa_forward(a[0], p, &st);
    ScsaGrads r = scsa_vjp(a[0], p, st, g);
    GradRecord out{std::move(r.dx), {}};
    put_head_grads(out, "", r);
    return out;
  };
  return op;
}

DiffOp multihead_op(std::size_t n, std::size_t d, RngStream& rng) {
  const std::size_t k = d % 2 == 0 && d >= 2 ? 2 : 1;
  DiffOp op;
  op.name = "multihead";
  op.arg_names = {"x"};
  op.args = {normal({n, d}, rng)};
  for (std::size_t h = 0; h < k; ++h) add_head(op, "head" + std::to_string(h) + ".", d, d / k, rng);
  op.arg_names.push_back("w_out");
  op.args.push_back(spectral_init({d, d}, rng));
  auto heads = [k](const DiffOp::Args& a) {
    std::vector<ScsaParams> hs;
    for (std::size_t h = 0; h < k; ++h) hs.push_back(head_from(a, 1 + 5 * h));
    return hs;
  };
  op.forward = [heads](const DiffOp::Args& a) {
    return multi_head_attention(a[0], heads(a), a.back(), AttentionKind::Scsa);
  };
  op.vjp = [heads](const DiffOp::Args& a, const Tensor& g) {
    const auto hs = heads(a);
    MultiHeadCache cache;
    multi_head_attention(a[0], hs, a.back(), AttentionKind::Scsa, &cache);
    MultiHeadGrads r = multi_head_attention_vjp(a[0], hs, a.back(), AttentionKind::Scsa, cache, g);
    GradRecord out{std::move(r.dx), {{"w_out", std::move(r.dw_out)}}};
    for (std::size_t h = 0; h < hs.size(); ++h) put_head_grads(out, "head" + std::to_string(h) + ".", r.heads[h]);
    return out;
  };
  return op;
}

DiffOp dot_attention_op(std::size_t n, std::size_t d, RngStream& rng) {
  DiffOp op;
  op.name = "dot_attention";
  op.arg_names = {"x", "wq", "wk", "wv"};
  op.args = {normal({n, d}, rng), spectral_init({d, d}, rng), spectral_init({d, d}, rng),
             spectral_init({d, d}, rng)};
  op.forward = [](const DiffOp::Args& a) { return dot_product_attention(a[0], a[1], a[2], a[3]); };
  op.vjp = [](const DiffOp::Args& a, const Tensor& g) {
    AttentionState st;
    dot_product_attention(a[0], a[1], a[2], a[3], &st);
    DotAttentionGrads r = dot_product_attention_vjp(a[0], a[1], a[2], a[3], st, g);
    return GradRecord{std::move(r.dx),
                      {{"wq", std::move(r.dwq)}, {"wk", std::move(r.dwk)}, {"wv", std::move(r.dwv)}}};
  };
  return op;
}

DiffOp affine_op(std::size_t n, std::size_t d, RngStream& rng) {
  DiffOp op;
  op.name = "affine";
  op.arg_names = {"x", "w", "b"};
  op.args = {normal({n, d}, rng), normal({d, d}, rng), normal({d}, rng)};
  op.forward = [](const DiffOp::Args& a) { return affine(a[0], a[1], a[2]); };
  op.vjp = [](const DiffOp::Args& a, const Tensor& g) {
    AffineGrads r = affine_vjp(a[0], a[1], true, g);
    return GradRecord{std::move(r.dx), {{"w", std::move(r.dw)}, {"b", std::move(r.db)}}};
  };
  return op;
}

DiffOp ffn_op(std::size_t n, std::size_t d, RngStream& rng) {
  const std::size_t hidden = 4 * d;
  DiffOp op;
  op.name = "ffn";
  op.arg_names = {"x", "w1", "b1", "w2", "b2"};
  op.args = {normal({n, d}, rng), spectral_init({d, hidden}, rng), normal({hidden}, rng, 0.1),
             spectral_init({hidden, d}, rng), normal({d}, rng, 0.1)};
  auto params = [](const DiffOp::Args& a) {
    FfnParams p;
    p.w1 = a[1];
    p.b1 = a[2];
    p.w2 = a[3];
    p.b2 = a[4];
    return p;
  };
  op.forward = [params](const DiffOp::Args& a) { return ffn_forward(a[0], params(a)); };
  op.vjp = [params](const DiffOp::Args& a, const Tensor& g) {
    const FfnParams p = params(a);
    FfnCache cache;
    ffn_forward(a[0], p, &cache);
    FfnGrads r = ffn_vjp(a[0], p, cache, g);
    return GradRecord{std::move(r.dx),
                      {{"w1", std::move(r.dw1)}, {"b1", std::move(r.db1)},
                       {"w2", std::move(r.dw2)}, {"b2", std::move(r.db2)}}};
  };
  return op;
}

DiffOp conv_op(std::size_t n, std::size_t d, RngStream& rng) {
  DiffOp op;
  op.name = "conv";
  op.arg_names = {"x", "dw_kernel", "dw_bias", "pw_weight", "pw_bias"};
  op.args = {normal({n, n, d}, rng), init_depthwise(d, kDepthwiseKernel * kDepthwiseKernel, InitKind::Spectral, rng),
             normal({d}, rng, 0.1), spectral_init({d, d}, rng), normal({d}, rng, 0.1)};
  auto params = [](const DiffOp::Args& a) { return ConvBlockParams{a[1], a[2], a[3], a[4]}; };
  op.forward = [params](const DiffOp::Args& a) { return conv_block(a[0], params(a)); };
  op.vjp = [params](const DiffOp::Args& a, const Tensor& g) {
    const ConvBlockParams p = params(a);
    ConvBlockCache cache;
    conv_block(a[0], p, &cache);
    ConvBlockGrads r = conv_block_vjp(a[0], p, cache, g);
    return GradRecord{std::move(r.dx),
                      {{"dw_kernel", std::move(r.ddw_kernel)}, {"dw_bias", std::move(r.ddw_bias)},
                       {"pw_weight", std::move(r.dpw_weight)}, {"pw_bias", std::move(r.dpw_bias)}}};
  };
  return op;
}

DiffOp wrs_op(std::size_t n, std::size_t d, RngStream& rng) {
  DiffOp op;
  op.name = "wrs";
  op.arg_names = {"x", "f", "alpha"};
  op.args = {normal({n, d}, rng), normal({n, d}, rng), normal({d}, rng, 0.2)};
  std::vector<std::uint8_t> keep = droppath_mask(n, 0.5, rng);
  op.forward = [keep](const DiffOp::Args& a) { return wrs_combine(a[0], a[1], a[2], keep); };
  op.vjp = [keep](const DiffOp::Args& a, const Tensor& g) {
    WrsGrads r = wrs_vjp(a[1], a[2], keep, g);
    return GradRecord{std::move(r.dx), {{"f", std::move(r.df)}, {"alpha", std::move(r.dalpha)}}};
  };
  return op;
}

}  // namespace

const std::vector<std::string>& registry_modules() {
  static const std::vector<std::string> names{
      "scsa", "multihead", "dot_attention", "centernorm", "layernorm", "affine", "ffn",
      "conv", "wrs", "gelu", "relu", "sigmoid", "tanh", "model"};
  return names;
}

ModelConfig gradcheck_model_config(std::uint64_t seed) {
  ModelConfig c;
  c.stage_depths = {1, 0, 0, 0};
  c.seed = seed;
  return c;
}

DiffOp model_op(const Model& source, const Tensor& input, bool training, std::uint64_t step) {
  auto model = std::make_shared<Model>(source);
  DiffOp op;
  op.name = "model";
  op.arg_names = {"input"};
  op.args = {input};
  for (auto& [name, t] : model_weights(*model)) {
    op.arg_names.push_back(name);
    op.args.push_back(std::move(t));
  }
  auto load = [model](const DiffOp::Args& a, const std::vector<std::string>& names) {
    std::vector<NamedTensor> w;
    for (std::size_t i = 1; i < a.size(); ++i) w.emplace_back(names[i], a[i]);
    assign_weights(*model, w);
  };
  const std::vector<std::string> names = op.arg_names;
  ForwardOptions fo;
  fo.training = training;
  fo.step = step;
  op.forward = [model, load, names, fo](const DiffOp::Args& a) {
    load(a, names);
    return model->forward(a[0], fo);
  };
  op.vjp = [model, load, names, fo](const DiffOp::Args& a, const Tensor& g) {
    load(a, names);
    Tape tape;
    ForwardOptions with_tape = fo;
    with_tape.tape = &tape;
    model->forward(a[0], with_tape);
    return model->backward(tape, g);
  };
  return op;
}

DiffOp make_registry_op(const std::string& name, std::size_t n, std::size_t d, std::uint64_t seed) {
  if (n < 1 || d < 2) throw std::invalid_argument("gradcheck: need n >= 1 and d >= 2");
  RngStream rng(seed, 0x7265676973747279ULL);
  if (name == "scsa") return scsa_op(n, d, rng);
  if (name == "multihead") return multihead_op(n, d, rng);
  if (name == "dot_attention") return dot_attention_op(n, d, rng);
  if (name == "centernorm") return norm_op(true, n, d, rng);
  if (name == "layernorm") return norm_op(false, n, d, rng);
  if (name == "affine") return affine_op(n, d, rng);
  if (name == "ffn") return ffn_op(n, d, rng);
  if (name == "conv") return conv_op(n, d, rng);
  if (name == "wrs") return wrs_op(n, d, rng);
  if (name == "gelu") return activation_op(Activation::Gelu, n, d, rng);
  if (name == "relu") return activation_op(Activation::Relu, n, d, rng);
  if (name == "sigmoid") return activation_op(Activation::Sigmoid, n, d, rng);
  if (name == "tanh") return activation_op(Activation::Tanh, n, d, rng);
  if (name == "model") {
    const ModelConfig c = gradcheck_model_config(seed);
    Shape s{2, c.image_size, c.image_size, c.in_channels};
    return model_op(Model(c), normal(s, rng), true, 0);
  }
  std::string known;
  for (const auto& m : registry_modules()) known += (known.empty() ? "" : ", ") + m;
  throw std::invalid_argument("unknown module '" + name + "' (known: " + known + ")");
}

}  // namespace lipscert
