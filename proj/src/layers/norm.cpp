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

#include "layers/norm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lipscert {

NormParams NormParams::identity(std::size_t dim) {
  return NormParams{Tensor({dim}, 1.0), Tensor({dim}, 0.0), std::nullopt};
}

void NormParams::validate() const {
  if (gamma.rank() != 1 || beta.shape() != gamma.shape()) {
    throw DimensionError("norm params: gamma " + shape_str(gamma.shape()) + " and beta " +
                         shape_str(beta.shape()) + " must be equal-length vectors");
  }
}

namespace {

std::size_t check_rows(const Tensor& x, const NormParams& p, const char* what) {
  p.validate();
  if (x.rank() == 0 || x.shape().back() != p.dim()) {
    throw DimensionError(std::string(what) + ": last axis of " + shape_str(x.shape()) +
                         " does not match parameter length " + std::to_string(p.dim()));
  }
  if (p.dim() < 2) {
    throw DimensionError(std::string(what) + ": needs D >= 2 (D = 1 is degenerate)");
  }
  return x.size() / p.dim();
}

double row_mean(const double* r, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) s += r[j];
  return s / static_cast<double>(d);
}

}  // namespace

Tensor center_norm(const Tensor& x, const CenterNormParams& params) {
  const std::size_t rows = check_rows(x, params, "center_norm");
  const std::size_t d = params.dim();
  const double scale = static_cast<double>(d) / static_cast<double>(d - 1);
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * d;
    double* o = out.data() + r * d;
    const double mu = row_mean(xr, d);
    for (std::size_t j = 0; j < d; ++j)
      o[j] = params.gamma[j] * (scale * (xr[j] - mu)) + params.beta[j];
  }
  return out;
}

NormGrads center_norm_vjp(const Tensor& x, const CenterNormParams& params, const Tensor& g) {
  const std::size_t rows = check_rows(x, params, "center_norm_vjp");
  require_same_shape(x, g, "center_norm_vjp");
  const std::size_t d = params.dim();
  const double scale = static_cast<double>(d) / static_cast<double>(d - 1);
  NormGrads out{Tensor(x.shape()), Tensor({d}), Tensor({d})};
  std::vector<double> dz(d);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * d;
    const double* gr = g.data() + r * d;
    double* dx = out.dx.data() + r * d;
    const double mu = row_mean(xr, d);
    for (std::size_t j = 0; j < d; ++j) {
      out.dgamma[j] += gr[j] * scale * (xr[j] - mu);
      out.dbeta[j] += gr[j];
      dz[j] = params.gamma[j] * gr[j];
    }
    const double dz_mean = row_mean(dz.data(), d);
    for (std::size_t j = 0; j < d; ++j) dx[j] = scale * (dz[j] - dz_mean);
  }
  return out;
}

Tensor center_norm_operator(std::size_t dim) {
  if (dim < 2) throw DimensionError("center_norm_operator: needs D >= 2");
  const double dd = static_cast<double>(dim);
  const double scale = dd / (dd - 1.0);
  Tensor m({dim, dim});
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) m(i, j) = scale * ((i == j ? 1.0 : 0.0) - 1.0 / dd);
  return m;
}

namespace {

struct RowStats {
  double mean;
  double std;
  bool clamped;
};

RowStats layer_norm_stats(const double* xr, std::size_t d, const LayerNormOptions& opts) {
  const double mu = row_mean(xr, d);
  double var = 0.0;
  for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
  var /= static_cast<double>(d);
  const double sd = std::sqrt(var);
  if (opts.guard) {
    if (sd < opts.floor) return {mu, opts.floor, true};
    return {mu, sd, false};
  }
  if (sd == 0.0) {
    throw NumericError("layer_norm: zero variance input (Std(y) = 0)");
  }
  return {mu, sd, false};
}

}  // namespace

Tensor layer_norm(const Tensor& x, const LayerNormParams& params, LayerNormOptions opts) {
  const std::size_t rows = check_rows(x, params, "layer_norm");
  const std::size_t d = params.dim();
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * d;
    double* o = out.data() + r * d;
    const RowStats st = layer_norm_stats(xr, d, opts);
    for (std::size_t j = 0; j < d; ++j)
      o[j] = params.gamma[j] * ((xr[j] - st.mean) / st.std) + params.beta[j];
  }
  return out;
}

NormGrads layer_norm_vjp(const Tensor& x, const LayerNormParams& params, const Tensor& g,
                         LayerNormOptions opts) {
  const std::size_t rows = check_rows(x, params, "layer_norm_vjp");
  require_same_shape(x, g, "layer_norm_vjp");
  const std::size_t d = params.dim();
  NormGrads out{Tensor(x.shape()), Tensor({d}), Tensor({d})};
  std::vector<double> z(d), dz(d);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * d;
    const double* gr = g.data() + r * d;
    double* dx = out.dx.data() + r * d;
    const RowStats st = layer_norm_stats(xr, d, opts);
    for (std::size_t j = 0; j < d; ++j) {
      z[j] = (xr[j] - st.mean) / st.std;
      out.dgamma[j] += gr[j] * z[j];
      out.dbeta[j] += gr[j];
      dz[j] = params.gamma[j] * gr[j];
    }
    const double m1 = row_mean(dz.data(), d);
    double m2 = 0.0;
    if (!st.clamped) {
      for (std::size_t j = 0; j < d; ++j) m2 += dz[j] * z[j];
      m2 /= static_cast<double>(d);
    }
    for (std::size_t j = 0; j < d; ++j) dx[j] = (dz[j] - m1 - z[j] * m2) / st.std;
  }
  return out;
}

Tensor layer_norm_jacobian(const Tensor& x) {
  if (x.rank() != 1) throw DimensionError("layer_norm_jacobian: expects a vector");
  const std::size_t d = x.size();
  if (d < 2) throw DimensionError("layer_norm_jacobian: needs D >= 2");
  const double mu = row_mean(x.data(), d);
  std::vector<double> y(d);
  double yy = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    y[j] = x[j] - mu;
    yy += y[j] * y[j];
  }
  const double sd = std::sqrt(yy / static_cast<double>(d));
  if (sd == 0.0) throw NumericError("layer_norm_jacobian: singular input (Std(y) = 0)");
  const double dd = static_cast<double>(d);
  // A = I − 11ᵀ/D, B = I − yyᵀ/‖y‖²; J = (1/Std) A B.
  Tensor a({d, d}), b({d, d});
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double id = i == j ? 1.0 : 0.0;
      a(i, j) = id - 1.0 / dd;
      b(i, j) = id - y[i] * y[j] / yy;
    }
  Tensor jac({d, d});
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < d; ++k)
      for (std::size_t j = 0; j < d; ++j) jac(i, j) += a(i, k) * b(k, j) / sd;
  return jac;
}

}  // namespace lipscert
