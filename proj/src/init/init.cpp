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

#include "init/init.hpp"

#include <cmath>
#include <stdexcept>

namespace lipscert {

std::string init_kind_name(InitKind k) {
  switch (k) {
    case InitKind::Xavier: return "xavier";
    case InitKind::TruncNormal: return "trunc_normal";
    case InitKind::Spectral: return "spectral";
  }
  return "?";
}

InitKind parse_init_kind(const std::string& s) {
  if (s == "xavier") return InitKind::Xavier;
  if (s == "trunc_normal") return InitKind::TruncNormal;
  if (s == "spectral") return InitKind::Spectral;
  throw std::invalid_argument("unknown init kind '" + s + "'");
}

void InitSpec::validate() const {
  if (fan_in < 1 || fan_out < 1) throw std::invalid_argument("init: fan_in and fan_out must be >= 1");
  if (kind == InitKind::TruncNormal && !(trunc_std >= 0.0 && trunc_bound >= 0.0)) {
    throw std::invalid_argument("init: truncated normal needs std >= 0 and bound >= 0");
  }
}

namespace {

void require_2d(const Shape& shape, const char* what) {
  if (shape.size() != 2) throw DimensionError(std::string(what) + ": expects a 2-D shape");
}

}  // namespace

Tensor xavier_init(const Shape& shape, RngStream& rng) {
  require_2d(shape, "xavier_init");
  const double sd = std::sqrt(2.0 / static_cast<double>(shape[0] + shape[1]));
  Tensor w(shape);
  for (double& v : w.values()) v = sd * rng.normal();
  return w;
}

Tensor spectral_normalize(const Tensor& w, std::size_t iters, double tol) {
  const double s = spectral_norm(w, iters, tol);
  if (s == 0.0) throw NumericError("spectral_normalize: all-zero matrix has no direction");
  return (1.0 / s) * w;
}

Tensor spectral_init(const Shape& shape, RngStream& rng, std::size_t iters, double tol) {
  Tensor w = xavier_init(shape, rng);
  if (max_abs(w) == 0.0) w = xavier_init(shape, rng);
  return spectral_normalize(w, iters, tol);
}

Tensor trunc_normal_init(const Shape& shape, double stddev, double lo, double hi,
                         RngStream& rng) {
  if (!(lo <= 0.0 && hi >= 0.0)) throw std::invalid_argument("trunc_normal: bounds must bracket 0");
  Tensor w(shape);
  if (stddev == 0.0) return w;
  for (double& v : w.values()) {
    double draw = stddev * rng.normal();
    while (draw < lo || draw > hi) draw = stddev * rng.normal();
    v = draw;
  }
  return w;
}

Tensor initialize(const InitSpec& spec, RngStream& rng) {
  spec.validate();
  const Shape shape{spec.fan_in, spec.fan_out};
  switch (spec.kind) {
    case InitKind::Xavier: return xavier_init(shape, rng);
    case InitKind::TruncNormal:
      return trunc_normal_init(shape, spec.trunc_std, -spec.trunc_bound, spec.trunc_bound, rng);
    case InitKind::Spectral: return spectral_init(shape, rng);
  }
  return Tensor(shape);
}

Tensor initialize(const InitSpec& spec) {
  RngStream rng(spec.seed);
  return initialize(spec, rng);
}

Tensor init_depthwise(std::size_t channels, std::size_t taps, InitKind kind, RngStream& rng) {
  Tensor k({channels, taps});
  for (std::size_t c = 0; c < channels; ++c) {
    InitSpec spec{kind, taps, 1};
    const Tensor col = initialize(spec, rng);
    for (std::size_t t = 0; t < taps; ++t) k(c, t) = col[t];
  }
  return k;
}

}  // namespace lipscert
