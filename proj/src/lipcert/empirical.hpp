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
#include <functional>
#include <vector>

#include "core/linalg.hpp"
#include "core/tensor.hpp"

namespace lipscert {

/// Single-input map.
using MapFn = std::function<Tensor(const Tensor&)>;
/// Optional batched form: input [B, ...input_shape] → output [B, ...].
using BatchMapFn = std::function<Tensor(const Tensor&)>;

inline constexpr std::size_t kDefaultPairs = 1000;
inline constexpr std::size_t kDefaultJacPoints = 32;
inline constexpr double kLocalRadius = 1e-4;
inline constexpr double kJacobianStep = 1e-5;
inline constexpr std::size_t kJacobianMaxDim = 4096;

struct EmpiricalOptions {
  std::size_t n_pairs = kDefaultPairs;
  std::size_t n_jac_points = kDefaultJacPoints;
  std::uint64_t seed = 0;
  BatchMapFn batched;  // used when set

  void validate() const;
};

/// Lower bound on the Lipschitz constant in one norm. Every statistic is a
/// realized ratio or Jacobian norm, so value ≤ the true constant (up to
/// finite-difference error).
struct EmpiricalEstimate {
  PNorm p = PNorm::Two;
  double value = 0.0;           // max of the three below
  double global_ratio = 0.0;    // pairs from N(0,1) / N(0,10²) mixtures
  double local_ratio = 0.0;     // x vs x + δ with ‖δ‖ = 1e-4
  double jacobian_norm = 0.0;   // forward-difference Jacobian operator norm
  std::size_t pairs = 0;        // per kind
  std::size_t jac_points = 0;   // 0 when the input is too large for a dense Jacobian
  std::uint64_t seed = 0;
  bool diverged = false;        // f produced a non-finite value
};

/// Estimates in each requested norm from one shared sample set.
std::vector<EmpiricalEstimate> empirical_lipschitz(const MapFn& f, const Shape& input_shape,
                                                   const std::vector<PNorm>& norms,
                                                   const EmpiricalOptions& opts);

EmpiricalEstimate empirical_lipschitz(const MapFn& f, const Shape& input_shape, PNorm p,
                                      const EmpiricalOptions& opts);

/// Finite-difference Jacobian, rows = outputs, columns = inputs. Central
/// differences cost 2n evaluations, forward differences n + 1.
Tensor fd_jacobian(const MapFn& f, const Tensor& x, double h, const BatchMapFn& batched = {},
                   bool central = true);

}  // namespace lipscert
