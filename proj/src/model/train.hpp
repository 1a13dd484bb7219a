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

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "model/config.hpp"
#include "model/dataset.hpp"
#include "model/model.hpp"

namespace lipscert {

/// Run outcome in the vocabulary of the stability ablations.
enum class Verdict { Converged, NotConverged, Diverged };

std::string verdict_name(Verdict v);

struct StepMetrics {
  std::size_t step = 0;
  double loss = 0.0;
  double max_act = 0.0;
  double grad_norm = 0.0;
  bool nan_flag = false;
};

struct EvalPoint {
  std::size_t step = 0;
  double train_accuracy = 0.0;
  double eval_accuracy = 0.0;
};

/// Append-only record of one run. Once nan_flag is set the run has stopped.
struct TrainMetrics {
  std::vector<StepMetrics> steps;
  std::vector<EvalPoint> evals;
  bool nan_flag = false;
  std::string abort_reason;

  void append(const StepMetrics& m);
  double initial_loss() const;
  /// Mean of the last min(100, steps) recorded losses.
  double tail_loss() const;
  double peak_max_act() const;
  Verdict verdict() const;
};

inline constexpr double kDivergeFactor = 10.0;
inline constexpr double kNotConvergeRatio = 0.95;
inline constexpr std::size_t kTailWindow = 100;
inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

/// Learning rate at a 0-based step: linear warmup, then cosine decay to 0
/// (or constant).
double learning_rate(const TrainConfig& t, std::size_t step);

struct TrainOptions {
  /// Evaluate accuracy every this many steps (0: only after the last step).
  std::size_t eval_every = 0;
  std::function<void(const StepMetrics&)> on_step;
};

/// AdamW with decoupled weight decay on weight matrices only. Positive
/// scalars (ν, τ) move in log space. config().freeze_scalars keeps γ, β, α,
/// ν and τ fixed; config().clamp_gamma clips γ after every update.
/// Shuffling and DropPath draw from the model seed.
TrainMetrics train(Model& model, const Dataset& train_set, const Dataset* eval_set,
                   const TrainConfig& t, const TrainOptions& opts = {});

/// Fraction of samples whose argmax logit equals the label (eval mode).
double accuracy(const Model& model, const Dataset& d);

/// CSV with header step,loss,max_act,grad_norm,nan_flag.
void write_metrics_csv(const TrainMetrics& m, std::ostream& out);
std::string metrics_csv(const TrainMetrics& m);

enum class AblationAxis { Norm, Attn, Alpha, DropPath, Warmup, Init };

std::string ablation_axis_name(AblationAxis a);
AblationAxis parse_ablation_axis(const std::string& s);

/// Applies one axis value to a copy of base. Throws ConfigError on a bad
/// value.
ModelConfig apply_ablation(const ModelConfig& base, AblationAxis axis, const std::string& value);

struct AblationRow {
  std::string value;
  Verdict verdict = Verdict::Converged;
  std::size_t steps_run = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double peak_max_act = 0.0;
  double train_accuracy = 0.0;
  double eval_accuracy = 0.0;
};

/// One training run per value on the synthetic task of each derived config.
std::vector<AblationRow> ablation_sweep(AblationAxis axis, const ModelConfig& base,
                                        const std::vector<std::string>& values,
                                        const TrainOptions& opts = {});

std::string ablation_csv(AblationAxis axis, const std::vector<AblationRow>& rows);

}  // namespace lipscert
