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

#include "autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "core/rng.hpp"

namespace lipscert {

void DiffOp::validate() const {
  if (args.empty() || arg_names.size() != args.size()) {
    throw std::invalid_argument("diff op '" + name + "': needs one name per argument");
  }
  if (!forward || !vjp) throw std::invalid_argument("diff op '" + name + "': missing callbacks");
}

GradRecord vjp(const DiffOp& op, const Tensor& cotangent) {
  op.validate();
  const Tensor y = op.forward(op.args);
  require_same_shape(y, cotangent, "vjp cotangent");
  if (!cotangent.all_finite()) throw NumericError("vjp: non-finite cotangent");
  return op.vjp(op.args, cotangent);
}

namespace {

const Tensor& analytic_for(const GradRecord& rec, const DiffOp& op, std::size_t arg) {
  if (arg == 0) return rec.input;
  const auto it = rec.params.find(op.arg_names[arg]);
  if (it == rec.params.end()) {
    throw std::logic_error("diff op '" + op.name + "': vjp produced no gradient for '" +
                           op.arg_names[arg] + "'");
  }
  return it->second;
}

}  // namespace

GradCheckReport finite_diff_check(const DiffOp& op, double step, double tol, std::uint64_t seed) {
  op.validate();
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_check: step must be > 0");

  GradCheckReport report;
  report.op = op.name;
  report.step = step;
  report.tol = tol;

  RngStream rng(seed, 0x6772616463686bULL);
  const Tensor y = op.forward(op.args);
  Tensor g(y.shape());
  for (double& v : g.values()) v = rng.normal();
  const GradRecord rec = op.vjp(op.args, g);

  std::size_t total = 0;
  for (const auto& a : op.args) total += a.size();
  const bool probe = total > kCoordinateLimit;

  DiffOp::Args work = op.args;
  auto phi = [&] { return dot(g, op.forward(work)); };

  for (std::size_t ai = 0; ai < op.args.size(); ++ai) {
    const Tensor& analytic = analytic_for(rec, op, ai);
    require_same_shape(analytic, op.args[ai], "gradient record");
    TensorCheck tc;
    tc.name = op.arg_names[ai];
    tc.probed = probe;
    Tensor& x = work[ai];
    if (!probe) {
      Tensor numeric(x.shape());
      std::vector<std::uint8_t> skip(x.size(), 0);
      for (std::size_t c = 0; c < x.size(); ++c) {
        if (op.exclude && op.exclude(op.args, ai, c)) {
          skip[c] = 1;
          ++tc.excluded;
          continue;
        }
        const double orig = x[c];
        x[c] = orig + step;
        const double fp = phi();
        x[c] = orig - step;
        const double fm = phi();
        x[c] = orig;
        numeric[c] = (fp - fm) / (2.0 * step);
        ++tc.checked;
      }
      double diff = 0.0, scale = 0.0;
      for (std::size_t c = 0; c < x.size(); ++c) {
        if (skip[c]) continue;
        diff = std::max(diff, std::abs(analytic[c] - numeric[c]));
        scale = std::max({scale, std::abs(analytic[c]), std::abs(numeric[c])});
      }
      tc.max_rel_error = diff / std::max(scale, kRelErrorFloor);
    } else {
      RngStream dir_rng = rng.fork(ai);
      const Tensor base = x;
      double diff = 0.0, scale = 0.0;
      for (std::size_t k = 0; k < kProbeDirections; ++k) {
        Tensor v(x.shape());
        double nn = 0.0;
        for (double& e : v.values()) {
          e = dir_rng.normal();
          nn += e * e;
        }
        nn = std::sqrt(nn);
        for (double& e : v.values()) e /= nn;
        x = base;
        axpy(step, v, x);
        const double fp = phi();
        x = base;
        axpy(-step, v, x);
        const double fm = phi();
        x = base;
        const double numeric = (fp - fm) / (2.0 * step);
        const double a = dot(analytic, v);
        diff = std::max(diff, std::abs(a - numeric));
        scale = std::max({scale, std::abs(a), std::abs(numeric)});
        ++tc.checked;
      }
      tc.max_rel_error = diff / std::max(scale, kRelErrorFloor);
    }
    if (!std::isfinite(tc.max_rel_error)) tc.max_rel_error = INFINITY;
    report.max_rel_error = std::max(report.max_rel_error, tc.max_rel_error);
    report.tensors.push_back(std::move(tc));
  }
  report.pass = report.max_rel_error <= tol;
  return report;
}

std::string format_report(const GradCheckReport& r) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "gradcheck %s step=%.3g tol=%.3g\n", r.op.c_str(), r.step, r.tol);
  out += line;
  for (const auto& t : r.tensors) {
    std::snprintf(line, sizeof line, "  %-28s max_rel_error=%.3e checked=%zu excluded=%zu%s\n",
                  t.name.c_str(), t.max_rel_error, t.checked, t.excluded,
                  t.probed ? " (probes)" : "");
    out += line;
  }
  std::snprintf(line, sizeof line, "result: %s (max_rel_error=%.3e)\n", r.pass ? "PASS" : "FAIL",
                r.max_rel_error);
  out += line;
  return out;
}

}  // namespace lipscert
