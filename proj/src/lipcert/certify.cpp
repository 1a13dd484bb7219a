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

#include "lipcert/certify.hpp"

#include <cmath>
#include <limits>

#include "autodiff/registry.hpp"
#include "core/format.hpp"
#include "core/rng.hpp"

#ifndef LIPSCERT_VERSION
#define LIPSCERT_VERSION "0.0.0"
#endif

namespace lipscert {

using nlohmann::json;

std::string tool_version() { return LIPSCERT_VERSION; }

bool dominates(double bound, double empirical) {
  return std::isfinite(bound) && std::isfinite(empirical) &&
         empirical <= bound * (1.0 + kDominanceTol);
}

namespace {

constexpr double kGradcheckStep = 1e-5;
constexpr double kGradcheckTol = 1e-4;

EmpiricalOptions seeded(const EmpiricalOptions& base, const BatchMapFn& batched, std::uint64_t salt) {
  EmpiricalOptions o = base;
  o.seed = mix64(base.seed ^ (0xC3A5C85C97CB3127ULL * (salt + 1)));
  o.batched = batched;
  return o;
}

}  // namespace

std::pair<std::vector<LayerCert>, CompositeCert> certify_layers(const std::vector<CertLayer>& layers,
                                                                const CertLayer& composite,
                                                                const CertOptions& opts) {
  std::vector<LayerCert> certs;
  CompositeCert comp;
  comp.theoretical.assign(opts.norms.size(), 1.0);
  for (const CertLayer& l : layers) {
    LayerCert c;
    c.name = l.name;
    c.kind = l.kind;
    for (std::size_t q = 0; q < opts.norms.size(); ++q) {
      c.bounds.push_back(l.bound(opts.norms[q]));
      comp.theoretical[q] *= c.bounds.back().value;
    }
    certs.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    LayerCert& c = certs[i];
    c.empirical = empirical_lipschitz(layers[i].forward, layers[i].input_shape, opts.norms,
                                      seeded(opts.empirical, layers[i].batched, i));
    c.pass = true;
    for (std::size_t q = 0; q < opts.norms.size(); ++q) {
      c.pass = c.pass && dominates(c.bounds[q].value, c.empirical[q].value);
    }
  }
  comp.empirical = empirical_lipschitz(composite.forward, composite.input_shape, opts.norms,
                                       seeded(opts.empirical, composite.batched, layers.size()));
  comp.pass = true;
  for (std::size_t q = 0; q < opts.norms.size(); ++q) {
    comp.pass = comp.pass && dominates(comp.theoretical[q], comp.empirical[q].value);
  }
  return {std::move(certs), std::move(comp)};
}

std::vector<CertLayer> model_cert_layers(const Model& model) {
  std::vector<CertLayer> out;
  for (std::size_t i = 0; i < model.layers().size(); ++i) {
    const Layer& l = model.layers()[i];
    CertLayer c;
    c.name = l.name;
    c.kind = layer_kind_name(l.kind);
    c.input_shape = l.input_shape();
    c.forward = [&model, i](const Tensor& x) { return model.forward_range(x, i, i + 1); };
    c.batched = c.forward;
    c.bound = [&l](PNorm p) { return layer_bound(l, p); };
    out.push_back(std::move(c));
  }
  return out;
}

CertLayer model_composite(const Model& model) {
  CertLayer c;
  c.name = "model";
  c.kind = "composition";
  c.input_shape = model.input_shape();
  c.forward = [&model](const Tensor& x) { return model.forward(x); };
  c.batched = c.forward;
  return c;
}

CertReport certify_model(const Model& model, const CertOptions& opts) {
  opts.empirical.validate();
  // Refuse before sampling if any layer lacks a finite bound.
  for (const Layer& l : model.layers()) layer_bound(l, PNorm::Two);

  CertReport r;
  r.version = tool_version();
  r.config = json::parse(config_to_json(model.config()));
  r.seed = opts.empirical.seed;
  r.pairs = opts.empirical.n_pairs;
  r.jac_points = opts.empirical.n_jac_points;
  r.norms = opts.norms;
  auto [layers, comp] = certify_layers(model_cert_layers(model), model_composite(model), opts);
  r.layers = std::move(layers);
  r.model = std::move(comp);
  for (PNorm p : opts.norms) {
    LipschitzBound b = network_bound(network_inputs(model, p));
    b.p = p;
    r.network.push_back(std::move(b));
  }

  if (opts.gradcheck) {
    RngStream rng(opts.empirical.seed, 0x6772616463686563ULL);
    Shape s{1};
    const Shape in = model.input_shape();
    s.insert(s.end(), in.begin(), in.end());
    Tensor x(s);
    for (double& v : x.values()) v = rng.normal();
    const GradCheckReport g =
        finite_diff_check(model_op(model, x, false, 0), kGradcheckStep, kGradcheckTol, opts.empirical.seed);
    r.gradcheck = {true, "model", g.max_rel_error, g.step, g.tol, g.pass};
  }

  r.pass = r.model.pass && r.gradcheck.pass;
  for (const LayerCert& l : r.layers) r.pass = r.pass && l.pass;
  return r;
}

namespace {

json num(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

double get_num(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw std::invalid_argument("report: bad number '" + s + "'");
  }
  return j.get<double>();
}

json bound_json(const LipschitzBound& b) {
  json terms = json::array();
  for (const auto& [k, v] : b.terms) terms.push_back({{"name", k}, {"value", num(v)}});
  return {{"p", pnorm_name(b.p)}, {"value", num(b.value)}, {"form", b.form},
          {"terms", terms}, {"assumptions", b.assumptions}};
}

LipschitzBound bound_from(const json& j) {
  LipschitzBound b;
  b.p = parse_pnorm(j.at("p").get<std::string>());
  b.value = get_num(j.at("value"));
  b.form = j.at("form").get<std::string>();
  for (const json& t : j.at("terms")) b.terms.emplace_back(t.at("name").get<std::string>(), get_num(t.at("value")));
  b.assumptions = j.at("assumptions").get<std::vector<std::string>>();
  return b;
}

json estimate_json(const EmpiricalEstimate& e) {
  return {{"p", pnorm_name(e.p)},
          {"value", num(e.value)},
          {"global_ratio", num(e.global_ratio)},
          {"local_ratio", num(e.local_ratio)},
          {"jacobian_norm", num(e.jacobian_norm)},
          {"pairs", e.pairs},
          {"jac_points", e.jac_points},
          {"seed", e.seed},
          {"diverged", e.diverged}};
}

EmpiricalEstimate estimate_from(const json& j) {
  EmpiricalEstimate e;
  e.p = parse_pnorm(j.at("p").get<std::string>());
  e.value = get_num(j.at("value"));
  e.global_ratio = get_num(j.at("global_ratio"));
  e.local_ratio = get_num(j.at("local_ratio"));
  e.jacobian_norm = get_num(j.at("jacobian_norm"));
  e.pairs = j.at("pairs").get<std::size_t>();
  e.jac_points = j.at("jac_points").get<std::size_t>();
  e.seed = j.at("seed").get<std::uint64_t>();
  e.diverged = j.at("diverged").get<bool>();
  return e;
}

}  // namespace

json report_to_json(const CertReport& r) {
  json j;
  j["tool"] = r.tool;
  j["version"] = r.version;
  j["config"] = r.config;
  j["seed"] = r.seed;
  j["pairs"] = r.pairs;
  j["jac_points"] = r.jac_points;
  json norms = json::array();
  for (PNorm p : r.norms) norms.push_back(pnorm_name(p));
  j["norms"] = norms;
  json layers = json::array();
  for (const LayerCert& l : r.layers) {
    json bounds = json::array(), emp = json::array();
    for (const auto& b : l.bounds) bounds.push_back(bound_json(b));
    for (const auto& e : l.empirical) emp.push_back(estimate_json(e));
    layers.push_back({{"name", l.name}, {"kind", l.kind}, {"bounds", bounds}, {"empirical", emp}, {"pass", l.pass}});
  }
  j["layers"] = layers;
  json theo = json::array(), emp = json::array(), net = json::array();
  for (double v : r.model.theoretical) theo.push_back(num(v));
  for (const auto& e : r.model.empirical) emp.push_back(estimate_json(e));
  for (const auto& b : r.network) net.push_back(bound_json(b));
  j["model"] = {{"theoretical", theo}, {"empirical", emp}, {"pass", r.model.pass}};
  j["network_bound"] = net;
  j["gradcheck"] = {{"run", r.gradcheck.run},
                    {"module", r.gradcheck.module},
                    {"max_rel_error", num(r.gradcheck.max_rel_error)},
                    {"step", num(r.gradcheck.step)},
                    {"tol", num(r.gradcheck.tol)},
                    {"pass", r.gradcheck.pass}};
  j["verdict"] = r.pass ? "pass" : "fail";
  return j;
}

CertReport report_from_json(const json& j) {
  CertReport r;
  r.tool = j.at("tool").get<std::string>();
  r.version = j.at("version").get<std::string>();
  r.config = j.at("config");
  r.seed = j.at("seed").get<std::uint64_t>();
  r.pairs = j.at("pairs").get<std::size_t>();
  r.jac_points = j.at("jac_points").get<std::size_t>();
  for (const json& p : j.at("norms")) r.norms.push_back(parse_pnorm(p.get<std::string>()));
  for (const json& l : j.at("layers")) {
    LayerCert c;
    c.name = l.at("name").get<std::string>();
    c.kind = l.at("kind").get<std::string>();
    for (const json& b : l.at("bounds")) c.bounds.push_back(bound_from(b));
    for (const json& e : l.at("empirical")) c.empirical.push_back(estimate_from(e));
    c.pass = l.at("pass").get<bool>();
    r.layers.push_back(std::move(c));
  }
  const json& m = j.at("model");
  for (const json& v : m.at("theoretical")) r.model.theoretical.push_back(get_num(v));
  for (const json& e : m.at("empirical")) r.model.empirical.push_back(estimate_from(e));
  r.model.pass = m.at("pass").get<bool>();
  for (const json& b : j.at("network_bound")) r.network.push_back(bound_from(b));
  const json& g = j.at("gradcheck");
  r.gradcheck.run = g.at("run").get<bool>();
  r.gradcheck.module = g.at("module").get<std::string>();
  r.gradcheck.max_rel_error = get_num(g.at("max_rel_error"));
  r.gradcheck.step = get_num(g.at("step"));
  r.gradcheck.tol = get_num(g.at("tol"));
  r.gradcheck.pass = g.at("pass").get<bool>();
  r.pass = j.at("verdict").get<std::string>() == "pass";
  return r;
}

std::string report_text(const CertReport& r) { return report_to_json(r).dump(2) + "\n"; }

}  // namespace lipscert
