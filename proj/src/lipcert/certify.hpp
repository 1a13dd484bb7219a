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

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lipcert/bounds.hpp"
#include "lipcert/empirical.hpp"
#include "model/model.hpp"

namespace lipscert {

inline constexpr double kDominanceTol = 1e-6;  // relative slack on empirical ≤ bound

/// One link of a composition to certify.
struct CertLayer {
  std::string name;
  std::string kind;
  Shape input_shape;
  MapFn forward;
  BatchMapFn batched;
  std::function<LipschitzBound(PNorm)> bound;
};

struct CertOptions {
  std::vector<PNorm> norms{PNorm::Two, PNorm::Inf};
  EmpiricalOptions empirical;
  bool gradcheck = true;
};

struct LayerCert {
  std::string name;
  std::string kind;
  std::vector<LipschitzBound> bounds;          // one per norm
  std::vector<EmpiricalEstimate> empirical;    // one per norm
  bool pass = false;
};

struct CompositeCert {
  std::vector<double> theoretical;             // product of layer bounds, per norm
  std::vector<EmpiricalEstimate> empirical;    // whole composition, per norm
  bool pass = false;
};

struct GradcheckSummary {
  bool run = false;
  std::string module;
  double max_rel_error = 0.0;
  double step = 0.0;
  double tol = 0.0;
  bool pass = true;
};

struct CertReport {
  std::string tool = "lipscert";
  std::string version;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::size_t pairs = 0;
  std::size_t jac_points = 0;
  std::vector<PNorm> norms;
  std::vector<LayerCert> layers;
  CompositeCert model;
  std::vector<LipschitzBound> network;         // residual-product bound, per norm
  GradcheckSummary gradcheck;
  bool pass = false;
};

/// True when empirical ≤ bound · (1 + kDominanceTol) and both are finite.
bool dominates(double bound, double empirical);

/// Bounds and empirical estimates for every layer and for the composition
/// (composite forward = whole map). The product of the layer bounds is
/// the composite's theoretical value.
std::pair<std::vector<LayerCert>, CompositeCert> certify_layers(const std::vector<CertLayer>& layers,
                                                                const CertLayer& composite,
                                                                const CertOptions& opts);

/// The model's layers as CertLayers plus the whole-network composite.
std::vector<CertLayer> model_cert_layers(const Model& model);
CertLayer model_composite(const Model& model);

/// Full certificate for a model at its current parameters. Throws
/// NonLipschitzError before any sampling when a layer has no finite bound.
CertReport certify_model(const Model& model, const CertOptions& opts);

nlohmann::json report_to_json(const CertReport& r);
CertReport report_from_json(const nlohmann::json& j);
/// Pretty JSON with a trailing newline.
std::string report_text(const CertReport& r);

std::string tool_version();

}  // namespace lipscert
