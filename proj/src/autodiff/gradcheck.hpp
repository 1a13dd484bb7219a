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
#include <map>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace lipscert {

/// Gradients from one backward pass: the input gradient and one tensor per
/// parameter, keyed by parameter path. Shapes mirror their sources.
struct GradRecord {
  Tensor input;
  std::map<std::string, Tensor> params;
};

/// A differentiable operation packaged for checking. args[0] is the input,
/// the rest are parameters; names double as GradRecord keys.
struct DiffOp {
  using Args = std::vector<Tensor>;

  std::string name;
  std::vector<std::string> arg_names;
  Args args;
  std::function<Tensor(const Args&)> forward;
  std::function<GradRecord(const Args&, const Tensor& cotangent)> vjp;
  /// Optional: true when coordinate `coord` of argument `arg` sits too close
  /// to a non-differentiable point and must be skipped.
  std::function<bool(const Args&, std::size_t arg, std::size_t coord)> exclude;

  void validate() const;
};

/// Runs op.vjp after checking the cotangent against the forward output.
GradRecord vjp(const DiffOp& op, const Tensor& cotangent);

inline constexpr std::size_t kCoordinateLimit = 10000;
inline constexpr std::size_t kProbeDirections = 24;
inline constexpr double kRelErrorFloor = 1e-8;

struct TensorCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;
  bool probed = false;  // random directions instead of coordinates
};

struct GradCheckReport {
  std::string op;
  std::vector<TensorCheck> tensors;
  double max_rel_error = 0.0;
  double step = 0.0;
  double tol = 0.0;
  bool pass = false;
};

/// Compares the analytic VJP against central differences of the scalar
/// ⟨g, f(args)⟩ for a seeded random cotangent g. Coordinates are checked one
/// by one while the total stays at or below kCoordinateLimit, otherwise each
/// tensor is probed along kProbeDirections random unit directions.
/// Per-tensor error: ‖a − b‖∞ / max(‖a‖∞, ‖b‖∞, 1e-8), over coordinates or
/// over the vector of directional derivatives.
GradCheckReport finite_diff_check(const DiffOp& op, double step, double tol,
                                  std::uint64_t seed = 0);

std::string format_report(const GradCheckReport& r);

}  // namespace lipscert
