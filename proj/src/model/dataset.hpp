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
#include <vector>

#include "core/tensor.hpp"
#include "model/config.hpp"

namespace lipscert {

/// Labeled images, channels-last [N, H, W, C].
struct Dataset {
  Tensor images;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  /// Gathers the listed samples into a batch.
  Tensor gather(const std::vector<std::size_t>& indices) const;
  std::vector<int> gather_labels(const std::vector<std::size_t>& indices) const;
};

struct SyntheticData {
  Tensor templates;  // [classes, H, W, C]
  Dataset train;
  Dataset eval;
};

/// Class c draws template_c + N(0, noise_std²) per pixel. The first 80% of
/// each class (rounded down) go to train, the rest to eval.
SyntheticData synth_dataset(std::size_t n_classes, std::size_t n_per_class, std::size_t image_size,
                            std::size_t channels, double noise_std, std::uint64_t seed);

/// Dataset matching a model config.
SyntheticData synth_dataset(const ModelConfig& c);

}  // namespace lipscert
