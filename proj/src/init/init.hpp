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
#include <string>

#include "core/linalg.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace lipscert {

enum class InitKind { Xavier, TruncNormal, Spectral };

std::string init_kind_name(InitKind k);
InitKind parse_init_kind(const std::string& s);

inline constexpr double kTruncStd = 0.02;

struct InitSpec {
  InitKind kind = InitKind::Spectral;
  std::size_t fan_in = 1;
  std::size_t fan_out = 1;
  double trunc_std = kTruncStd;
  double trunc_bound = 2.0 * kTruncStd;  // samples lie in [-bound, bound]
  std::uint64_t seed = 0;

  void validate() const;
};

/// Entries ~ Normal(0, 2/(fan_in + fan_out)) with fan_in, fan_out = shape.
Tensor xavier_init(const Shape& shape, RngStream& rng);

// Power iteration converges slowly when the top two singular values are
// close, so normalization runs longer than the generic norm estimate.
inline constexpr std::size_t kSpectralInitIters = 20000;
inline constexpr double kSpectralInitTol = 1e-15;

/// Divides w by its spectral norm. An all-zero w raises NumericError.
Tensor spectral_normalize(const Tensor& w, std::size_t iters = kSpectralInitIters,
                          double tol = kSpectralInitTol);

/// Xavier draw divided by its largest singular value. An all-zero draw is
/// redrawn once before failing.
Tensor spectral_init(const Shape& shape, RngStream& rng, std::size_t iters = kSpectralInitIters,
                     double tol = kSpectralInitTol);

/// Normal(0, std²) restricted to [lo, hi] by rejection. std = 0 gives zeros.
Tensor trunc_normal_init(const Shape& shape, double stddev, double lo, double hi,
                         RngStream& rng);

/// Draws a [fan_in × fan_out] matrix from RngStream(spec.seed).
Tensor initialize(const InitSpec& spec);
/// Same, drawing from a caller-owned stream.
Tensor initialize(const InitSpec& spec, RngStream& rng);

/// Depthwise kernel [channels × taps]. Each channel's taps form an
/// independent taps×1 operator; spectral init scales each to unit ℓ2 norm.
Tensor init_depthwise(std::size_t channels, std::size_t taps, InitKind kind, RngStream& rng);

}  // namespace lipscert
