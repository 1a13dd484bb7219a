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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "core/tensor.hpp"

namespace lipscert {

enum class PNorm { Two, Inf };

std::string pnorm_name(PNorm p);  // "2" or "inf"
PNorm parse_pnorm(const std::string& s);

// Raw kernels. Every output element accumulates over the inner index in
// increasing order, so results are bit-stable for a given build.
//
//   gemm:    C[m×n] (+)= A[m×k] · B[k×n]
//   gemm_tn: C[m×n] (+)= A[k×m]ᵀ · B[k×n]
//   gemm_nt: C[m×n] (+)= A[m×k] · B[n×k]ᵀ
void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n, bool accumulate = false);
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate = false);
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate = false);

Tensor matmul(const Tensor& a, const Tensor& b);
/// aᵀ · b
Tensor matmul_tn(const Tensor& a, const Tensor& b);
/// a · bᵀ
Tensor matmul_nt(const Tensor& a, const Tensor& b);

struct SpectralNormResult {
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

inline constexpr std::size_t kPowerIters = 200;
inline constexpr double kPowerTol = 1e-10;
inline constexpr std::uint64_t kPowerSeed = 0x5EC7A1ULL;

/// Largest singular value by power iteration on WᵀW. Converged when two
/// successive estimates differ by at most tol (relative). An all-zero matrix
/// returns exactly 0.
SpectralNormResult spectral_norm_ex(const Tensor& w, std::size_t iters = kPowerIters,
                                    double tol = kPowerTol);
double spectral_norm(const Tensor& w, std::size_t iters = kPowerIters, double tol = kPowerTol);

/// Maximum absolute row sum.
double inf_norm(const Tensor& w);
double frobenius_norm(const Tensor& w);

double vector_norm(std::span<const double> v, PNorm p);
inline double vector_norm(const Tensor& t, PNorm p) { return vector_norm(t.values(), p); }

/// Induced operator norm of a materialized matrix: spectral norm or max row sum.
double operator_norm(const Tensor& m, PNorm p);

}  // namespace lipscert
