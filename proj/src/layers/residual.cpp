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

#include "layers/residual.hpp"

#include <stdexcept>
#include <string>

namespace lipscert {

void WrsParams::validate() const {
  if (alpha.rank() != 1) throw DimensionError("wrs: alpha must be a vector");
  if (!(drop_prob >= 0.0 && drop_prob <= 1.0)) {
    throw std::invalid_argument("wrs: drop probability must lie in [0, 1]");
  }
}

namespace {

void check_channels(const Tensor& x, const Tensor& f_out, const Tensor& alpha) {
  require_same_shape(x, f_out, "wrs");
  if (x.rank() == 0 || x.shape().back() != alpha.size()) {
    throw DimensionError("wrs: channel axis of " + shape_str(x.shape()) +
                         " does not match alpha length " + std::to_string(alpha.size()));
  }
}

}  // namespace

Tensor wrs_forward(const Tensor& x, const Tensor& f_out, const WrsParams& params, bool training,
                   RngStream& rng) {
  params.validate();
  check_channels(x, f_out, params.alpha);
  if (training && rng.uniform() < params.drop_prob) return x;
  const std::size_t c = params.alpha.size();
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += params.alpha[i % c] * f_out[i];
  return out;
}

Tensor wrs_combine(const Tensor& x, const Tensor& f_out, const Tensor& alpha,
                   const std::vector<std::uint8_t>& keep) {
  check_channels(x, f_out, alpha);
  const std::size_t c = alpha.size();
  const std::size_t batch = x.dim(0);
  if (!keep.empty() && keep.size() != batch) throw DimensionError("wrs: keep mask length");
  const std::size_t per = x.size() / batch;
  Tensor out = x;
  for (std::size_t b = 0; b < batch; ++b) {
    if (!keep.empty() && !keep[b]) continue;
    double* o = out.data() + b * per;
    const double* f = f_out.data() + b * per;
    for (std::size_t i = 0; i < per; ++i) o[i] += alpha[i % c] * f[i];
  }
  return out;
}

WrsGrads wrs_vjp(const Tensor& f_out, const Tensor& alpha, const std::vector<std::uint8_t>& keep,
                 const Tensor& g) {
  check_channels(f_out, g, alpha);
  const std::size_t c = alpha.size();
  const std::size_t batch = g.dim(0);
  if (!keep.empty() && keep.size() != batch) throw DimensionError("wrs: keep mask length");
  const std::size_t per = g.size() / batch;
  WrsGrads out{g, Tensor(g.shape()), Tensor({c})};
  for (std::size_t b = 0; b < batch; ++b) {
    if (!keep.empty() && !keep[b]) continue;
    const double* gb = g.data() + b * per;
    const double* fb = f_out.data() + b * per;
    double* df = out.df.data() + b * per;
    for (std::size_t i = 0; i < per; ++i) {
      df[i] = alpha[i % c] * gb[i];
      out.dalpha[i % c] += fb[i] * gb[i];
    }
  }
  return out;
}

std::vector<std::uint8_t> droppath_mask(std::size_t batch, double p, RngStream& rng) {
  std::vector<std::uint8_t> keep(batch, 1);
  for (auto& k : keep) k = rng.uniform() >= p ? 1 : 0;
  return keep;
}

}  // namespace lipscert
