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
// lipscert command-line front end. Exit status: 0 pass, 1 domain failure
// (certification failure, divergence), 2 usage or validation error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "lipscert/lipscert.h"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct Freer {
  void operator()(char* s) const { lipscert_string_free(s); }
  void operator()(lipscert_config* c) const { lipscert_config_free(c); }
  void operator()(lipscert_model* m) const { lipscert_model_free(m); }
  void operator()(lipscert_cert_report* r) const { lipscert_cert_report_free(r); }
  void operator()(lipscert_train_result* r) const { lipscert_train_result_free(r); }
};
template <typename T>
using Owned = std::unique_ptr<T, Freer>;

/// Thrown to unwind with a chosen exit status after printing a message.
struct Exit {
  int code;
};

int status_exit(lipscert_status s) {
  switch (s) {
    case LIPSCERT_OK: return kExitPass;
    case LIPSCERT_ERR_NON_LIPSCHITZ:
    case LIPSCERT_ERR_NUMERIC: return kExitFail;
    default: return kExitUsage;
  }
}

void check(lipscert_status s) {
  if (s == LIPSCERT_OK) return;
  std::cerr << "error: " << lipscert_last_error() << '\n';
  throw Exit{status_exit(s)};
}

std::string take(char* s) {
  Owned<char> guard(s);
  return s ? std::string(s) : std::string();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.close();
  if (!out) {
    std::cerr << "error: cannot write '" << path << "'\n";
    throw Exit{kExitUsage};
  }
}

std::string read_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot read '" << path << "'\n";
    throw Exit{kExitUsage};
  }
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Owned<lipscert_config> load_config(const std::string& path) {
  lipscert_config* c = nullptr;
  check(path.empty() ? lipscert_config_default(&c) : lipscert_config_load(path.c_str(), &c));
  return Owned<lipscert_config>(c);
}

void set(lipscert_config* c, const char* key, const std::string& json) {
  check(lipscert_config_set(c, key, json.c_str()));
}

Owned<lipscert_model> make_model(const lipscert_config* c) {
  lipscert_model* m = nullptr;
  check(lipscert_model_create(c, &m));
  return Owned<lipscert_model>(m);
}

struct CertifyArgs {
  std::string config, out, weights, norm = "both";
  std::size_t pairs = 1000, jac_points = 32;
  std::optional<std::uint64_t> seed;
  bool no_gradcheck = false;
};

int run_certify(const CertifyArgs& a) {
  if (a.pairs == 0) {
    std::cerr << "error: --pairs must be at least 1\n";
    return kExitUsage;
  }
  auto cfg = load_config(a.config);
  if (a.seed) set(cfg.get(), "seed", std::to_string(*a.seed));
  auto model = make_model(cfg.get());
  if (!a.weights.empty()) check(lipscert_model_load(model.get(), a.weights.c_str()));

  lipscert_cert_options opts;
  lipscert_cert_options_default(&opts);
  opts.pairs = a.pairs;
  opts.jac_points = a.jac_points;
  check(lipscert_config_seed(cfg.get(), &opts.seed));
  opts.norms = a.norm == "2" ? LIPSCERT_NORM_2 : a.norm == "inf" ? LIPSCERT_NORM_INF
                                                                 : LIPSCERT_NORM_2 | LIPSCERT_NORM_INF;
  opts.gradcheck = a.no_gradcheck ? 0 : 1;

  lipscert_cert_report* raw = nullptr;
  check(lipscert_certify(model.get(), &opts, &raw));
  Owned<lipscert_cert_report> report(raw);
  char* json = nullptr;
  check(lipscert_cert_report_json(report.get(), &json));
  write_output(a.out, take(json));
  int pass = 0;
  check(lipscert_cert_report_pass(report.get(), &pass));
  std::cerr << "verdict: " << (pass ? "pass" : "fail") << '\n';
  return pass ? kExitPass : kExitFail;
}

struct GradcheckArgs {
  std::string module;
  std::size_t n = 4, d = 8;
  double step = 1e-5, tol = 1e-4;
  std::uint64_t seed = 0;
};

int run_gradcheck(const GradcheckArgs& a) {
  lipscert_gradcheck_result r{};
  char* text = nullptr;
  check(lipscert_gradcheck(a.module.c_str(), a.n, a.d, a.step, a.tol, a.seed, &r, &text));
  std::cout << take(text);
  return r.pass ? kExitPass : kExitFail;
}

struct TrainArgs {
  std::string config, out, weights;
  std::optional<std::size_t> steps, warmup_steps;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a) {
  if (a.steps && *a.steps == 0) {
    std::cerr << "error: --steps must be at least 1\n";
    return kExitUsage;
  }
  auto cfg = load_config(a.config);
  if (a.steps) set(cfg.get(), "train.steps", std::to_string(*a.steps));
  if (a.warmup_steps) set(cfg.get(), "train.warmup_steps", std::to_string(*a.warmup_steps));
  if (a.lr) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", *a.lr);
    set(cfg.get(), "train.lr", buf);
  }
  if (a.seed) set(cfg.get(), "seed", std::to_string(*a.seed));
  auto model = make_model(cfg.get());

  lipscert_train_result* raw = nullptr;
  check(lipscert_train(model.get(), &raw));
  Owned<lipscert_train_result> result(raw);
  char* csv = nullptr;
  check(lipscert_train_result_csv(result.get(), &csv));
  write_output(a.out, take(csv));
  if (!a.weights.empty()) check(lipscert_model_save(model.get(), a.weights.c_str()));

  lipscert_verdict verdict{};
  std::size_t steps = 0;
  int nan_flag = 0;
  double train_acc = 0.0, eval_acc = 0.0;
  check(lipscert_train_result_verdict(result.get(), &verdict));
  check(lipscert_train_result_summary(result.get(), &steps, &nan_flag, &train_acc, &eval_acc));
  static const char* names[] = {"converged", "not_converge", "diverged"};
  std::fprintf(stderr, "verdict: %s steps=%zu train_acc=%.4f eval_acc=%.4f\n", names[verdict], steps,
               train_acc, eval_acc);
  return verdict == LIPSCERT_DIVERGED ? kExitFail : kExitPass;
}

struct AblateArgs {
  std::string axis, values, config, out;
};

int run_ablate(const AblateArgs& a) {
  auto cfg = load_config(a.config);
  char* csv = nullptr;
  check(lipscert_ablate(cfg.get(), a.axis.c_str(), a.values.c_str(), &csv));
  write_output(a.out, take(csv));
  return kExitPass;
}

struct ReportArgs {
  std::string in, svg;
};

int run_report(const ReportArgs& a) {
  const std::string csv = read_input(a.in);
  char* svg = nullptr;
  check(lipscert_render_svg(csv.c_str(), &svg));
  write_output(a.svg, take(svg));
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lipschitz certification, gradient checks and training for Lipschitz-continuous vision transformers"};
  app.set_version_flag("--version", std::string(lipscert_version()));
  app.require_subcommand(1);

  CertifyArgs cert;
  auto* c = app.add_subcommand("certify", "Bound and estimate the Lipschitz constant of every layer");
  c->add_option("--config", cert.config, "Model config JSON (default: built-in toy config)")
      ->check(CLI::ExistingFile);
  c->add_option("--weights", cert.weights, "Weight file to load before certifying");
  c->add_option("--pairs", cert.pairs, "Random input pairs per layer")->capture_default_str();
  c->add_option("--jac-points", cert.jac_points, "Jacobian probes per layer")->capture_default_str();
  c->add_option("--seed", cert.seed, "Overrides the config seed (model init and sampling)");
  c->add_option("--norm", cert.norm, "Norm to certify")
      ->check(CLI::IsMember({"2", "inf", "both"}))
      ->capture_default_str();
  c->add_flag("--no-gradcheck", cert.no_gradcheck, "Skip the whole-model gradient check");
  c->add_option("--out", cert.out, "Report path (default: stdout)");

  GradcheckArgs gc;
  auto* g = app.add_subcommand("gradcheck", "Compare an analytic VJP against finite differences");
  g->add_option("--module", gc.module, std::string("One of: ") + lipscert_gradcheck_modules())
      ->required();
  g->add_option("--n", gc.n, "Tokens (grid side for conv)")->capture_default_str();
  g->add_option("--d", gc.d, "Width")->capture_default_str();
  g->add_option("--step", gc.step, "Finite-difference step")->capture_default_str();
  g->add_option("--tol", gc.tol, "Relative error tolerance")->capture_default_str();
  g->add_option("--seed", gc.seed, "Seed")->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train on the synthetic task and write per-step metrics");
  t->add_option("--config", tr.config, "Model config JSON (default: built-in toy config)")
      ->check(CLI::ExistingFile);
  t->add_option("--steps", tr.steps, "Training steps (overrides config)");
  t->add_option("--lr", tr.lr, "Peak learning rate (overrides config)");
  t->add_option("--warmup-steps", tr.warmup_steps, "Linear warmup steps (overrides config)");
  t->add_option("--seed", tr.seed, "Overrides the config seed");
  t->add_option("--out", tr.out, "Metrics CSV path (default: stdout)");
  t->add_option("--save-weights", tr.weights, "Write trained weights here");

  AblateArgs ab;
  auto* a = app.add_subcommand("ablate", "Train one run per value of an ablation axis");
  a->add_option("--axis", ab.axis, "norm, attn, alpha, droppath, warmup or init")->required();
  a->add_option("--values", ab.values, "Comma separated values")->required();
  a->add_option("--config", ab.config, "Base config JSON (default: built-in toy config)")
      ->check(CLI::ExistingFile);
  a->add_option("--out", ab.out, "Table CSV path (default: stdout)");

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "Plot a metrics CSV as SVG");
  r->add_option("--in", rp.in, "Metrics CSV")->required();
  r->add_option("--svg", rp.svg, "SVG path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }

  try {
    if (*c) return run_certify(cert);
    if (*g) return run_gradcheck(gc);
    if (*t) return run_train(tr);
    if (*a) return run_ablate(ab);
    if (*r) return run_report(rp);
  } catch (const Exit& e) {
    return e.code;
  }
  return kExitUsage;
}
