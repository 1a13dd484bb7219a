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
#include <vector>

#include "autodiff/gradcheck.hpp"
#include "model/model.hpp"

namespace lipscert {

/// Names accepted by make_registry_op, in display order.
const std::vector<std::string>& registry_modules();

/// Builds a randomly parameterized instance of a named operation with n
/// tokens (grid side for conv) of width d. "model" ignores n and d and uses
/// the depths-[1,0,0,0] toy network on a batch of two images.
/// Unknown names raise std::invalid_argument.
DiffOp make_registry_op(const std::string& name, std::size_t n, std::size_t d, std::uint64_t seed);

/// Whole-network op on a copy of model: args are the input batch followed by
/// parameters() in order. training selects DropPath masks for the given step.
DiffOp model_op(const Model& model, const Tensor& input, bool training, std::uint64_t step);

/// Smallest config used for full-network gradient checks.
ModelConfig gradcheck_model_config(std::uint64_t seed);

}  // namespace lipscert
