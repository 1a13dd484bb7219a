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

#include <string>

#include "core/tensor.hpp"

namespace lipscert {

enum class Activation { Sigmoid, Tanh, Relu, Gelu };

std::string activation_name(Activation a);
Activation parse_activation(const std::string& name);

/// GELU is the sigmoid approximation x · sigmoid(1.702 x).
inline constexpr double kGeluSlope = 1.702;

double activate(Activation kind, double x);
/// relu'(0) is taken as 0.
double activate_derivative(Activation kind, double x);

Tensor activation(Activation kind, const Tensor& x);
/// g ⊙ f′(x)
Tensor activation_vjp(Activation kind, const Tensor& x, const Tensor& g);

/// Tabulated Lipschitz constants: 1/4, 1, 1, 1.0998.
double activation_lipschitz(Activation kind);

}  // namespace lipscert
