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

#include "layers/affine.hpp"

#include <string>

#include "core/linalg.hpp"

namespace lipscert {

namespace {

std::size_t check_affine(const Tensor& x, const Tensor& w, const char* what) {
  require_rank(w, 2, what);
  if (x.rank() == 0 || x.shape().back() != w.rows()) {
    throw DimensionError(std::string(what) + ": input " + shape_str(x.shape()) +
                         " does not match weight " + shape_str(w.shape()));
  }
  return x.size() / w.rows();
}

}  // namespace

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t rows = check_affine(x, w, "affine");
  const std::size_t out_dim = w.cols();
  if (!b.empty() && b.size() != out_dim) {
    throw DimensionError("affine: bias " + shape_str(b.shape()) + " does not match weight " +
                         shape_str(w.shape()));
  }
  Shape shape = x.shape();
  shape.back() = out_dim;
  Tensor y(shape);
  gemm(x.data(), w.data(), y.data(), rows, w.rows(), out_dim);
  if (!b.empty()) {
    for (std::size_t r = 0; r < rows; ++r) {
      double* yr = y.data() + r * out_dim;
      for (std::size_t j = 0; j < out_dim; ++j) yr[j] += b[j];
    }
  }
  return y;
}

AffineGrads affine_vjp(const Tensor& x, const Tensor& w, bool has_bias, const Tensor& g) {
  const std::size_t rows = check_affine(x, w, "affine_vjp");
  const std::size_t in_dim = w.rows(), out_dim = w.cols();
  if (g.size() != rows * out_dim || g.shape().back() != out_dim) {
    throw DimensionError("affine_vjp: cotangent " + shape_str(g.shape()) +
                         " does not match output of weight " + shape_str(w.shape()));
  }
  AffineGrads out;
  out.dx = Tensor(x.shape());
  gemm_nt(g.data(), w.data(), out.dx.data(), rows, out_dim, in_dim);
  out.dw = Tensor({in_dim, out_dim});
  gemm_tn(x.data(), g.data(), out.dw.data(), in_dim, rows, out_dim);
  if (has_bias) {
    out.db = Tensor({out_dim});
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < out_dim; ++j) out.db[j] += g[r * out_dim + j];
  }
  return out;
}

Tensor ffn_forward(const Tensor& x, const FfnParams& p, FfnCache* cache) {
  Tensor pre = affine(x, p.w1, p.b1);
  Tensor y = affine(activation(p.act, pre), p.w2, p.b2);
  if (cache) cache->pre = std::move(pre);
  return y;
}

FfnGrads ffn_vjp(const Tensor& x, const FfnParams& p, const FfnCache& cache, const Tensor& g) {
  const Tensor h = activation(p.act, cache.pre);
  AffineGrads second = affine_vjp(h, p.w2, !p.b2.empty(), g);
  const Tensor dpre = activation_vjp(p.act, cache.pre, second.dx);
  AffineGrads first = affine_vjp(x, p.w1, !p.b1.empty(), dpre);
  return FfnGrads{std::move(first.dx), std::move(first.dw), std::move(first.db),
                  std::move(second.dw), std::move(second.db)};
}

}  // namespace lipscert
