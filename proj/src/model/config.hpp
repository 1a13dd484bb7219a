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
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "attention/attention.hpp"
#include "init/init.hpp"

namespace lipscert {

/// Raised for malformed or inconsistent configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class NormKind { CenterNorm, LayerNorm, None };

/// Where the residual normalization sits:
///   Wrap:   norm(x + α ⊙ drop(f(x)))     (default)
///   Pre:    x + α ⊙ drop(f(norm(x)))
///   Branch: x + α ⊙ drop(norm(f(x)))
enum class NormPlacement { Wrap, Pre, Branch };

enum class Schedule { Cosine, Constant };

std::string norm_kind_name(NormKind k);
NormKind parse_norm_kind(const std::string& s);
std::string norm_placement_name(NormPlacement p);
NormPlacement parse_norm_placement(const std::string& s);
std::string schedule_name(Schedule s);
Schedule parse_schedule(const std::string& s);

struct DatasetConfig {
  std::size_t n_per_class = 100;
  double noise_std = 0.5;
};

struct TrainConfig {
  std::size_t steps = 2000;
  double lr = 2e-3;
  std::size_t batch_size = 64;
  std::size_t warmup_steps = 0;
  double weight_decay = 0.05;
  Schedule schedule = Schedule::Cosine;
  double label_smoothing = 0.1;
};

inline constexpr int kSchemaVersion = 1;

struct ModelConfig {
  std::vector<std::size_t> stage_depths{1, 1, 2, 1};
  std::vector<std::size_t> channels{16, 32, 64, 128};
  std::vector<std::size_t> heads{1, 2, 4, 4};
  std::optional<double> alpha;  // empty = auto (1 / total blocks)
  double droppath = 0.1;
  NormKind norm_kind = NormKind::CenterNorm;
  NormPlacement norm_placement = NormPlacement::Wrap;
  AttentionKind attn_kind = AttentionKind::Scsa;
  InitKind init_kind = InitKind::Spectral;
  double tau = kDefaultTau;
  double nu = kDefaultNu;
  double eps = kDefaultEps;
  std::size_t image_size = 16;
  std::size_t in_channels = 3;
  std::size_t patch_size = 2;
  std::size_t n_classes = 10;
  std::size_t ffn_ratio = 4;
  std::uint64_t seed = 0;
  bool freeze_scalars = false;
  bool clamp_gamma = false;
  DatasetConfig dataset;
  TrainConfig train;

  std::size_t total_blocks() const;
  /// The α every block starts from.
  double resolved_alpha() const;
  /// Throws ConfigError on any inconsistency.
  void validate() const;
};

/// Parses a JSON document. Unknown keys, wrong types and a missing or
/// unsupported schema_version are rejected.
ModelConfig parse_config(const std::string& json_text);
ModelConfig load_config(const std::string& path);
/// Canonical JSON (sorted keys, every field present).
std::string config_to_json(const ModelConfig& c, int indent = 2);

}  // namespace lipscert
