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

#include "model/dataset.hpp"

#include <algorithm>
#include <stdexcept>

#include "core/rng.hpp"

namespace lipscert {

Tensor Dataset::gather(const std::vector<std::size_t>& indices) const {
  Shape s = images.shape();
  const std::size_t per = images.size() / s[0];
  s[0] = indices.size();
  Tensor out(s);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) throw std::out_of_range("dataset index");
    std::copy_n(images.data() + indices[i] * per, per, out.data() + i * per);
  }
  return out;
}

std::vector<int> Dataset::gather_labels(const std::vector<std::size_t>& indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels.at(i));
  return out;
}

SyntheticData synth_dataset(std::size_t n_classes, std::size_t n_per_class, std::size_t image_size,
                            std::size_t channels, double noise_std, std::uint64_t seed) {
  if (n_classes < 2) throw ConfigError("synth_dataset: need at least 2 classes");
  if (n_per_class < 1) throw ConfigError("synth_dataset: need at least 1 sample per class");
  if (!(noise_std >= 0.0)) throw ConfigError("synth_dataset: noise_std must be >= 0");
  const std::size_t per = image_size * image_size * channels;
  const std::size_t n_train = n_per_class * 4 / 5;
  const std::size_t n_eval = n_per_class - n_train;

  SyntheticData d;
  d.templates = Tensor({n_classes, image_size, image_size, channels});
  RngStream tmpl(seed, 0x74656D706CULL);
  for (double& v : d.templates.values()) v = tmpl.normal();

  d.train.images = Tensor({n_classes * n_train, image_size, image_size, channels});
  d.eval.images = Tensor({n_classes * n_eval, image_size, image_size, channels});
  RngStream noise(seed, 0x6E6F697365ULL);
  std::size_t ti = 0, ei = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    const double* t = d.templates.data() + c * per;
    for (std::size_t i = 0; i < n_per_class; ++i) {
      Dataset& dst = i < n_train ? d.train : d.eval;
      std::size_t& row = i < n_train ? ti : ei;
      double* out = dst.images.data() + row * per;
      for (std::size_t j = 0; j < per; ++j) out[j] = t[j] + noise_std * noise.normal();
      dst.labels.push_back(static_cast<int>(c));
      ++row;
    }
  }
  return d;
}

SyntheticData synth_dataset(const ModelConfig& c) {
  return synth_dataset(c.n_classes, c.dataset.n_per_class, c.image_size, c.in_channels,
                       c.dataset.noise_std, c.seed);
}

}  // namespace lipscert
