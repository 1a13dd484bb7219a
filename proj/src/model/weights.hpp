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

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "core/tensor.hpp"
#include "model/model.hpp"

namespace lipscert {

inline constexpr std::uint32_t kWeightFormatVersion = 1;

using NamedTensor = std::pair<std::string, Tensor>;

/// "LIPS" magic, then little-endian u32 version, u32 count and per tensor
/// u32 name length, name bytes, u32 rank, u64 extents, f64 data.
void write_weights(const std::vector<NamedTensor>& tensors, std::ostream& out);
std::vector<NamedTensor> read_weights(std::istream& in);

/// Model parameters in parameters() order; scalars are rank 0.
std::vector<NamedTensor> model_weights(Model& model);
void save_weights(Model& model, const std::string& path);
/// Names and shapes must match the model exactly.
void load_weights(Model& model, const std::string& path);
void assign_weights(Model& model, const std::vector<NamedTensor>& tensors);

}  // namespace lipscert
