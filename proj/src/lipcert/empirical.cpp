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

#include "lipcert/empirical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "core/parallel.hpp"
#include "core/rng.hpp"

namespace lipscert {

void EmpiricalOptions::validate() const {
  if (n_pairs < 1) throw std::invalid_argument("empirical_lipschitz: n_pairs must be >= 1");
}

namespace {

constexpr std::size_t kPairChunk = 50;
constexpr double kWideScale = 10.0;
constexpr std::uint64_t kGlobalStream = 0x10000;
constexpr std::uint64_t kLocalStream = 0x20000;
constexpr std::uint64_t kJacStream = 0x30000;

// Each point is N(0,1) or N(0,10²) with equal probability.
Tensor mixture_point(const Shape& shape, RngStream& rng) {
  const double scale = rng.uniform() < 0.5 ? 1.0 : kWideScale;
  Tensor x(shape);
  for (double& v : x.values()) v = scale * rng.normal();
  return x;
}

Tensor stack(const std::vector<Tensor>& xs) {
  Shape s{xs.size()};
  s.insert(s.end(), xs[0].shape().begin(), xs[0].shape().end());
  Tensor out(s);
  const std::size_t per = xs[0].size();
  for (std::size_t i = 0; i < xs.size(); ++i) std::copy_n(xs[i].data(), per, out.data() + i * per);
  return out;
}

Tensor slice(const Tensor& batch, std::size_t i) {
  const std::size_t per = batch.size() / batch.dim(0);
  Tensor out(Shape(batch.shape().begin() + 1, batch.shape().end()));
  std::copy_n(batch.data() + i * per, per, out.data());
  return out;
}

std::vector<Tensor> apply_all(const MapFn& f, const BatchMapFn& batched, const std::vector<Tensor>& xs) {
  std::vector<Tensor> out;
  out.reserve(xs.size());
  if (batched) {
    const Tensor ys = batched(stack(xs));
    for (std::size_t i = 0; i < xs.size(); ++i) out.push_back(slice(ys, i));
  } else {
    for (const Tensor& x : xs) out.push_back(f(x));
  }
  return out;
}

struct Partial {
  std::vector<double> global, local, jac;
  bool diverged = false;
  std::size_t jac_done = 0;
};

// Ratios for consecutive (a, b) pairs in xs.
void pair_ratios(const std::vector<Tensor>& xs, const std::vector<Tensor>& ys,
                 const std::vector<PNorm>& norms, std::vector<double>& best, bool& diverged) {
  for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
    const Tensor dy = ys[i] - ys[i + 1];
    if (!dy.all_finite()) {
      diverged = true;
      continue;
    }
    const Tensor dx = xs[i] - xs[i + 1];
    for (std::size_t k = 0; k < norms.size(); ++k) {
      const double den = vector_norm(dx, norms[k]);
      if (den > 0.0) best[k] = std::max(best[k], vector_norm(dy, norms[k]) / den);
    }
  }
}

}  // namespace

Tensor fd_jacobian(const MapFn& f, const Tensor& x, double h, const BatchMapFn& batched,
                   bool central) {
  const std::size_t n = x.size();
  std::vector<Tensor> probes;
  probes.reserve(central ? 2 * n : n + 1);
  if (!central) probes.push_back(x);
  for (std::size_t c = 0; c < n; ++c) {
    Tensor plus = x;
    plus[c] += h;
    probes.push_back(std::move(plus));
    if (central) {
      Tensor minus = x;
      minus[c] -= h;
      probes.push_back(std::move(minus));
    }
  }
  const std::vector<Tensor> ys = apply_all(f, batched, probes);
  const std::size_t m = ys[0].size();
  Tensor jac({m, n});
  for (std::size_t c = 0; c < n; ++c) {
    const Tensor& hi = central ? ys[2 * c] : ys[c + 1];
    const Tensor& lo = central ? ys[2 * c + 1] : ys[0];
    const double span = central ? 2.0 * h : h;
    for (std::size_t r = 0; r < m; ++r) jac(r, c) = (hi[r] - lo[r]) / span;
  }
  return jac;
}

std::vector<EmpiricalEstimate> empirical_lipschitz(const MapFn& f, const Shape& input_shape,
                                                   const std::vector<PNorm>& norms,
                                                   const EmpiricalOptions& opts) {
  opts.validate();
  if (norms.empty()) throw std::invalid_argument("empirical_lipschitz: no norms requested");
  const std::size_t k = norms.size();
  const std::size_t pair_chunks = (opts.n_pairs + kPairChunk - 1) / kPairChunk;
  const bool dense_jac = shape_numel(input_shape) <= kJacobianMaxDim;
  const std::size_t jac_tasks = dense_jac ? opts.n_jac_points : 0;
  const std::size_t tasks = 2 * pair_chunks + jac_tasks;

  std::vector<Partial> parts(tasks);
  for (Partial& p : parts) {
    p.global.assign(k, 0.0);
    p.local.assign(k, 0.0);
    p.jac.assign(k, 0.0);
  }

  auto run = [&](std::size_t t) {
    Partial& part = parts[t];
    if (t < 2 * pair_chunks) {
      const bool local = t >= pair_chunks;
      const std::size_t chunk = local ? t - pair_chunks : t;
      const std::size_t count = std::min(kPairChunk, opts.n_pairs - chunk * kPairChunk);
      RngStream rng(opts.seed, (local ? kLocalStream : kGlobalStream) + chunk);
      std::vector<Tensor> xs;
      xs.reserve(2 * count);
      for (std::size_t i = 0; i < count; ++i) {
        Tensor a = mixture_point(input_shape, rng);
        Tensor b;
        if (local) {
          // Gaussian directions probe ℓ2, sign vectors probe ℓ∞; alternate.
          Tensor d(input_shape);
          const bool sign = (chunk * kPairChunk + i) % 2 == 1;
          for (double& v : d.values()) v = sign ? (rng.uniform() < 0.5 ? -1.0 : 1.0) : rng.normal();
          const double scale = kLocalRadius / vector_norm(d, sign ? PNorm::Inf : PNorm::Two);
          b = a;
          axpy(scale, d, b);
        } else {
          b = mixture_point(input_shape, rng);
        }
        xs.push_back(std::move(a));
        xs.push_back(std::move(b));
      }
      const std::vector<Tensor> ys = apply_all(f, opts.batched, xs);
      pair_ratios(xs, ys, norms, local ? part.local : part.global, part.diverged);
      return;
    }
    const std::size_t j = t - 2 * pair_chunks;
    RngStream rng(opts.seed, kJacStream + j);
    const Tensor x = mixture_point(input_shape, rng);
    const Tensor jac = fd_jacobian(f, x, kJacobianStep, opts.batched, false);
    if (!jac.all_finite()) {
      part.diverged = true;
      return;
    }
    for (std::size_t q = 0; q < k; ++q) part.jac[q] = operator_norm(jac, norms[q]);
    part.jac_done = 1;
  };
  parallel_for(tasks, [&](std::size_t t) {
    try {
      run(t);
    } catch (const NumericError&) {
      parts[t].diverged = true;
    }
  });

  std::vector<EmpiricalEstimate> out(k);
  for (std::size_t q = 0; q < k; ++q) {
    EmpiricalEstimate& e = out[q];
    e.p = norms[q];
    e.pairs = opts.n_pairs;
    e.seed = opts.seed;
    for (const Partial& p : parts) {
      e.global_ratio = std::max(e.global_ratio, p.global[q]);
      e.local_ratio = std::max(e.local_ratio, p.local[q]);
      e.jacobian_norm = std::max(e.jacobian_norm, p.jac[q]);
      e.jac_points += p.jac_done;
      e.diverged = e.diverged || p.diverged;
    }
    e.value = std::max({e.global_ratio, e.local_ratio, e.jacobian_norm});
    if (e.diverged) e.value = std::numeric_limits<double>::infinity();
  }
  return out;
}

EmpiricalEstimate empirical_lipschitz(const MapFn& f, const Shape& input_shape, PNorm p,
                                      const EmpiricalOptions& opts) {
  return empirical_lipschitz(f, input_shape, std::vector<PNorm>{p}, opts)[0];
}

}  // namespace lipscert
