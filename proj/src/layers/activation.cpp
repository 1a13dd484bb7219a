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

#include "layers/activation.hpp"

#include <cmath>
#include <stdexcept>

namespace lipscert {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Gelu: return "gelu";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "gelu") return Activation::Gelu;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double activate(Activation kind, double x) {
  switch (kind) {
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Tanh: return std::tanh(x);
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::Gelu: return x * sigmoid(kGeluSlope * x);
  }
  return 0.0;
}

double activate_derivative(Activation kind, double x) {
  switch (kind) {
    case Activation::Sigmoid: {
      const double s = sigmoid(x);
      return s * (1.0 - s);
    }
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::Gelu: {
      const double s = sigmoid(kGeluSlope * x);
      return s + kGeluSlope * x * s * (1.0 - s);
    }
  }
  return 0.0;
}

Tensor activation(Activation kind, const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = activate(kind, x[i]);
  return out;
}

Tensor activation_vjp(Activation kind, const Tensor& x, const Tensor& g) {
  require_same_shape(x, g, "activation_vjp");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = g[i] * activate_derivative(kind, x[i]);
  return out;
}

double activation_lipschitz(Activation kind) {
  switch (kind) {
    case Activation::Sigmoid: return 0.25;
    case Activation::Tanh: return 1.0;
    case Activation::Relu: return 1.0;
    case Activation::Gelu: return 1.0998;
  }
  return 0.0;
}

}  // namespace lipscert
