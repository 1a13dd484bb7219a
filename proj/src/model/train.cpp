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

#include "model/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include "core/format.hpp"
#include "core/parallel.hpp"
#include "core/rng.hpp"

namespace lipscert {

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Converged: return "converged";
    case Verdict::NotConverged: return "not_converge";
    case Verdict::Diverged: return "diverged";
  }
  return "?";
}

void TrainMetrics::append(const StepMetrics& m) {
  steps.push_back(m);
  if (m.nan_flag) nan_flag = true;
}

double TrainMetrics::initial_loss() const { return steps.empty() ? 0.0 : steps.front().loss; }

double TrainMetrics::tail_loss() const {
  if (steps.empty()) return 0.0;
  const std::size_t n = std::min(kTailWindow, steps.size());
  double s = 0.0;
  for (std::size_t i = steps.size() - n; i < steps.size(); ++i) s += steps[i].loss;
  return s / static_cast<double>(n);
}

double TrainMetrics::peak_max_act() const {
  double m = 0.0;
  for (const StepMetrics& s : steps) {
    if (std::isfinite(s.max_act)) m = std::max(m, s.max_act);
  }
  return m;
}

Verdict TrainMetrics::verdict() const {
  if (nan_flag || steps.empty()) return Verdict::Diverged;
  const double l0 = initial_loss();
  for (const StepMetrics& s : steps) {
    if (!std::isfinite(s.loss) || s.loss > kDivergeFactor * l0) return Verdict::Diverged;
  }
  return tail_loss() >= kNotConvergeRatio * l0 ? Verdict::NotConverged : Verdict::Converged;
}

double learning_rate(const TrainConfig& t, std::size_t step) {
  if (step < t.warmup_steps) {
    return t.lr * static_cast<double>(step + 1) / static_cast<double>(t.warmup_steps);
  }
  if (t.schedule == Schedule::Constant) return t.lr;
  const std::size_t span = t.steps > t.warmup_steps ? t.steps - t.warmup_steps : 1;
  const double progress = static_cast<double>(step - t.warmup_steps) / static_cast<double>(span);
  return 0.5 * t.lr * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0)));
}

namespace {

bool is_scalar_role(ParamRole r) { return r != ParamRole::Weight && r != ParamRole::Bias; }

struct AdamState {
  std::vector<double> m, v;
};

std::vector<std::size_t> shuffled(std::size_t n, RngStream& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

}  // namespace

double accuracy(const Model& model, const Dataset& d) {
  if (d.size() == 0) return 0.0;
  constexpr std::size_t kChunk = 64;
  const std::size_t chunks = (d.size() + kChunk - 1) / kChunk;
  std::vector<std::size_t> correct(chunks, 0);
  parallel_for(chunks, [&](std::size_t c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = c * kChunk; i < std::min(d.size(), (c + 1) * kChunk); ++i) idx.push_back(i);
    const Tensor logits = model.forward(d.gather(idx));
    for (std::size_t b = 0; b < idx.size(); ++b) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < logits.cols(); ++j) {
        if (logits(b, j) > logits(b, best)) best = j;
      }
      if (static_cast<int>(best) == d.labels[idx[b]]) ++correct[c];
    }
  });
  return static_cast<double>(std::accumulate(correct.begin(), correct.end(), std::size_t{0})) /
         static_cast<double>(d.size());
}

TrainMetrics train(Model& model, const Dataset& train_set, const Dataset* eval_set,
                   const TrainConfig& t, const TrainOptions& opts) {
  if (t.steps < 1) throw ConfigError("train: steps must be >= 1");
  if (!(t.lr >= 0.0) || !(t.weight_decay >= 0.0)) throw ConfigError("train: lr and weight_decay must be >= 0");
  if (t.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (train_set.size() == 0) throw ConfigError("train: empty training set");

  const ModelConfig& mc = model.config();
  std::vector<ParamRef> params = model.parameters();
  std::vector<AdamState> state(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    state[i].m.assign(params[i].size(), 0.0);
    state[i].v.assign(params[i].size(), 0.0);
  }

  RngStream shuffle_rng(mc.seed, 0x73687566666C65ULL);
  const std::size_t batch = std::min(t.batch_size, train_set.size());
  std::vector<std::size_t> order = shuffled(train_set.size(), shuffle_rng);
  std::size_t cursor = 0;

  TrainMetrics metrics;
  auto record_eval = [&](std::size_t step) {
    metrics.evals.push_back(
        {step, accuracy(model, train_set), eval_set ? accuracy(model, *eval_set) : 0.0});
  };

  double b1t = 1.0, b2t = 1.0;
  for (std::size_t step = 0; step < t.steps; ++step) {
    if (cursor + batch > order.size()) {
      order = shuffled(train_set.size(), shuffle_rng);
      cursor = 0;
    }
    std::vector<std::size_t> idx(order.begin() + cursor, order.begin() + cursor + batch);
    cursor += batch;

    StepMetrics sm;
    sm.step = step;
    GradRecord grads;
    try {
      Tape tape;
      ForwardOptions fo;
      fo.training = true;
      fo.step = step;
      fo.tape = &tape;
      fo.max_act = &sm.max_act;
      const Tensor logits = model.forward(train_set.gather(idx), fo);
      LossResult lr = cross_entropy(logits, train_set.gather_labels(idx), t.label_smoothing);
      sm.loss = lr.loss;
      if (std::isfinite(lr.loss) && lr.dlogits.all_finite()) grads = model.backward(tape, lr.dlogits);
      else sm.nan_flag = true;
    } catch (const NumericError& e) {
      sm.nan_flag = true;
      metrics.abort_reason = e.what();
      if (!std::isfinite(sm.loss)) sm.loss = std::numeric_limits<double>::quiet_NaN();
    }

    if (!sm.nan_flag) {
      double sq = 0.0;
      for (const auto& [name, g] : grads.params) {
        for (double v : g.values()) sq += v * v;
      }
      sm.grad_norm = std::sqrt(sq);
      if (!std::isfinite(sm.grad_norm) || !std::isfinite(sm.max_act)) sm.nan_flag = true;
    }
    if (sm.nan_flag) {
      if (metrics.abort_reason.empty()) metrics.abort_reason = "non-finite value at step " + std::to_string(step);
      metrics.append(sm);
      if (opts.on_step) opts.on_step(sm);
      break;
    }

    const double lr = learning_rate(t, step);
    b1t *= kAdamBeta1;
    b2t *= kAdamBeta2;
    for (std::size_t i = 0; i < params.size(); ++i) {
      ParamRef& p = params[i];
      if (mc.freeze_scalars && is_scalar_role(p.role)) continue;
      const auto it = grads.params.find(p.name);
      if (it == grads.params.end()) continue;
      const Tensor& g = it->second;
      AdamState& s = state[i];
      auto adam = [&](std::size_t j, double theta, double gj) {
        s.m[j] = kAdamBeta1 * s.m[j] + (1.0 - kAdamBeta1) * gj;
        s.v[j] = kAdamBeta2 * s.v[j] + (1.0 - kAdamBeta2) * gj * gj;
        const double mhat = s.m[j] / (1.0 - b1t);
        const double vhat = s.v[j] / (1.0 - b2t);
        return theta - lr * mhat / (std::sqrt(vhat) + kAdamEps);
      };
      if (p.scalar) {
        // Log-space step keeps ν and τ positive: d/dθ = v · d/dv.
        const double v = *p.scalar;
        *p.scalar = std::exp(adam(0, std::log(v), v * g[0]));
        continue;
      }
      Tensor& w = *p.tensor;
      const double decay = p.role == ParamRole::Weight ? 1.0 - lr * t.weight_decay : 1.0;
      for (std::size_t j = 0; j < w.size(); ++j) w[j] = adam(j, w[j] * decay, g[j]);
      if (p.role == ParamRole::NormScale && mc.clamp_gamma) {
        for (double& v : w.values()) v = std::clamp(v, kGammaClampMin, kGammaClampMax);
      }
    }

    metrics.append(sm);
    if (opts.on_step) opts.on_step(sm);
    if (opts.eval_every > 0 && (step + 1) % opts.eval_every == 0 && step + 1 < t.steps) {
      record_eval(step + 1);
    }
  }
  if (!metrics.nan_flag) record_eval(metrics.steps.size());
  return metrics;
}

void write_metrics_csv(const TrainMetrics& m, std::ostream& out) {
  out << "step,loss,max_act,grad_norm,nan_flag\n";
  for (const StepMetrics& s : m.steps) {
    out << s.step << ',' << format_double(s.loss) << ',' << format_double(s.max_act) << ','
        << format_double(s.grad_norm) << ',' << (s.nan_flag ? 1 : 0) << '\n';
  }
}

std::string metrics_csv(const TrainMetrics& m) {
  std::ostringstream os;
  write_metrics_csv(m, os);
  return os.str();
}

std::string ablation_axis_name(AblationAxis a) {
  switch (a) {
    case AblationAxis::Norm: return "norm";
    case AblationAxis::Attn: return "attn";
    case AblationAxis::Alpha: return "alpha";
    case AblationAxis::DropPath: return "droppath";
    case AblationAxis::Warmup: return "warmup";
    case AblationAxis::Init: return "init";
  }
  return "?";
}

AblationAxis parse_ablation_axis(const std::string& s) {
  for (AblationAxis a : {AblationAxis::Norm, AblationAxis::Attn, AblationAxis::Alpha,
                         AblationAxis::DropPath, AblationAxis::Warmup, AblationAxis::Init}) {
    if (ablation_axis_name(a) == s) return a;
  }
  throw ConfigError("unknown ablation axis '" + s + "' (expected norm, attn, alpha, droppath, warmup or init)");
}

namespace {

double parse_number(const std::string& s, const char* what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ConfigError(std::string(what) + ": not a number: '" + s + "'");
  return v;
}

}  // namespace

ModelConfig apply_ablation(const ModelConfig& base, AblationAxis axis, const std::string& value) {
  ModelConfig c = base;
  try {
    switch (axis) {
      case AblationAxis::Norm: c.norm_kind = parse_norm_kind(value); break;
      case AblationAxis::Attn: c.attn_kind = parse_attention_kind(value); break;
      case AblationAxis::Alpha:
        if (value == "auto") c.alpha.reset();
        else c.alpha = parse_number(value, "alpha");
        break;
      case AblationAxis::DropPath: c.droppath = parse_number(value, "droppath"); break;
      case AblationAxis::Warmup: {
        const double w = parse_number(value, "warmup");
        if (w < 0 || w != std::floor(w)) throw ConfigError("warmup: expected a non-negative integer");
        c.train.warmup_steps = static_cast<std::size_t>(w);
        break;
      }
      case AblationAxis::Init: c.init_kind = parse_init_kind(value); break;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  return c;
}

std::vector<AblationRow> ablation_sweep(AblationAxis axis, const ModelConfig& base,
                                        const std::vector<std::string>& values,
                                        const TrainOptions& opts) {
  if (values.empty()) throw ConfigError("ablation: no values given");
  std::vector<ModelConfig> configs;
  for (const std::string& v : values) configs.push_back(apply_ablation(base, axis, v));
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    Model model(configs[i]);
    const SyntheticData data = synth_dataset(configs[i]);
    const TrainMetrics m = train(model, data.train, &data.eval, configs[i].train, opts);
    AblationRow r;
    r.value = values[i];
    r.verdict = m.verdict();
    r.steps_run = m.steps.size();
    r.initial_loss = m.initial_loss();
    r.final_loss = m.tail_loss();
    r.peak_max_act = m.peak_max_act();
    if (!m.evals.empty()) {
      r.train_accuracy = m.evals.back().train_accuracy;
      r.eval_accuracy = m.evals.back().eval_accuracy;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string ablation_csv(AblationAxis axis, const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "axis,value,verdict,steps_run,initial_loss,final_loss,peak_max_act,train_acc,eval_acc\n";
  for (const AblationRow& r : rows) {
    os << ablation_axis_name(axis) << ',' << r.value << ',' << verdict_name(r.verdict) << ','
       << r.steps_run << ',' << format_double(r.initial_loss) << ',' << format_double(r.final_loss)
       << ',' << format_double(r.peak_max_act) << ',' << format_double(r.train_accuracy) << ','
       << format_double(r.eval_accuracy) << '\n';
  }
  return os.str();
}

}  // namespace lipscert
