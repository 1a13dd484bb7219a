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

#include "core/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "core/rng.hpp"

namespace lipscert {

std::string pnorm_name(PNorm p) { return p == PNorm::Two ? "2" : "inf"; }

PNorm parse_pnorm(const std::string& s) {
  if (s == "2") return PNorm::Two;
  if (s == "inf") return PNorm::Inf;
  throw std::invalid_argument("unknown norm '" + s + "' (expected 2 or inf)");
}

void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n, bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(double) * m * n);
  for (std::size_t i = 0; i < m; ++i) {
    double* __restrict ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* __restrict bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(double) * m * n);
  // p outermost keeps both a and b streaming; each c[i][j] still sums in p order.
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* __restrict bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = ap[i];
      double* __restrict ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] = accumulate ? ci[j] + s : s;
    }
  }
}

namespace {

void require_matrix(const Tensor& t, const char* what) { require_rank(t, 2, what); }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree " + shape_str(a.shape()) + " · " +
                         shape_str(b.shape()));
  }
  Tensor c({a.rows(), b.cols()});
  gemm(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn: inner dimensions disagree " + shape_str(a.shape()) +
                         "ᵀ · " + shape_str(b.shape()));
  }
  Tensor c({a.cols(), b.cols()});
  gemm_tn(a.data(), b.data(), c.data(), a.cols(), a.rows(), b.cols());
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: inner dimensions disagree " + shape_str(a.shape()) +
                         " · " + shape_str(b.shape()) + "ᵀ");
  }
  Tensor c({a.rows(), b.rows()});
  gemm_nt(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.rows());
  return c;
}

SpectralNormResult spectral_norm_ex(const Tensor& w, std::size_t iters, double tol) {
  require_matrix(w, "spectral_norm");
  if (w.empty()) throw DimensionError("spectral_norm: empty matrix");
  if (iters < 1) throw std::invalid_argument("spectral_norm: iters must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("spectral_norm: tol must be > 0");

  SpectralNormResult res;
  if (max_abs(w) == 0.0) {
    res.converged = true;
    return res;
  }

  const std::size_t m = w.rows(), n = w.cols();
  RngStream rng(kPowerSeed, (static_cast<std::uint64_t>(m) << 32) ^ n);
  std::vector<double> v(n), u(m);
  for (double& x : v) x = rng.normal();

  auto normalize = [](std::vector<double>& x) {
    double s = 0.0;
    for (double e : x) s += e * e;
    s = std::sqrt(s);
    if (s > 0.0)
      for (double& e : x) e /= s;
    return s;
  };
  normalize(v);

  double prev = -1.0;
  for (std::size_t it = 1; it <= iters; ++it) {
    // u = W v, v = Wᵀ u; ‖Wᵀ W v‖ → σ² for unit v, σ = ‖W v‖.
    gemm(w.data(), v.data(), u.data(), m, n, 1);
    const double sigma = normalize(u);
    gemm_tn(w.data(), u.data(), v.data(), n, m, 1);
    const double sigma2 = normalize(v);
    const double est = std::max(sigma, sigma2);
    res.value = est;
    res.iterations = it;
    if (sigma2 == 0.0) {
      // v landed in the null space; restart from a fresh direction.
      for (double& x : v) x = rng.normal();
      normalize(v);
      continue;
    }
    if (prev >= 0.0 && std::abs(est - prev) <= tol * est) {
      res.converged = true;
      break;
    }
    prev = est;
  }
  return res;
}

double spectral_norm(const Tensor& w, std::size_t iters, double tol) {
  return spectral_norm_ex(w, iters, tol).value;
}

double inf_norm(const Tensor& w) {
  require_matrix(w, "inf_norm");
  double best = 0.0;
  for (std::size_t i = 0; i < w.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < w.cols(); ++j) s += std::abs(w(i, j));
    best = std::max(best, s);
  }
  return best;
}

double frobenius_norm(const Tensor& w) {
  double s = 0.0;
  for (double v : w.values()) s += v * v;
  return std::sqrt(s);
}

double vector_norm(std::span<const double> v, PNorm p) {
  if (p == PNorm::Inf) {
    double m = 0.0;
    for (double e : v) {
      if (std::isnan(e)) return e;
      m = std::max(m, std::abs(e));
    }
    return m;
  }
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

double operator_norm(const Tensor& m, PNorm p) {
  return p == PNorm::Two ? spectral_norm(m) : inf_norm(m);
}

}  // namespace lipscert
