// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Run all twelve, or pass criterion numbers to select.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "CLI11.hpp"
#include "autodiff/registry.hpp"
#include "init/init.hpp"
#include "lipcert/certify.hpp"
#include "model/dataset.hpp"
#include "model/train.hpp"

using namespace lipscert;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Eigen::MatrixXd to_eigen(const Tensor& t) {
  Eigen::MatrixXd m(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) m(i, j) = t(i, j);
  return m;
}

double sigma_max(const Tensor& t) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(to_eigen(t));
  return svd.singularValues()(0);
}

Tensor gaussian(const Shape& s, RngStream& rng, double scale) {
  Tensor t(s);
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Context {
  std::string cli;
  fs::path workdir;

  int run_cli(const std::string& args, const std::string& env = "") const {
    const std::string cmd = env + (env.empty() ? "" : " ") + cli + " " + args + " 2>>" +
                            (workdir / "cli.stderr").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
};

// 1
Outcome scsa_dominance() {
  const std::size_t ns[] = {2, 4, 8, 16};
  const std::size_t dhs[] = {4, 8, 16};
  std::size_t violations = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    RngStream rng(1000 + i);
    const std::size_t n = ns[i % 4], dh = dhs[(i / 4) % 3];
    const std::size_t d = dh;
    ScsaParams p;
    p.eps = 1e-6;
    p.tau = 12.0;
    p.nu = 1.0;
    p.wq = gaussian({d, dh}, rng, 1.0 / std::sqrt(static_cast<double>(d)));
    p.wk = gaussian({d, dh}, rng, 1.0 / std::sqrt(static_cast<double>(d)));
    p.wv = gaussian({d, dh}, rng, 1.0 / std::sqrt(static_cast<double>(d)));
    EmpiricalOptions opts;
    opts.n_pairs = 1000;
    opts.n_jac_points = 32;
    opts.seed = i;
    const auto est = empirical_lipschitz([&](const Tensor& x) { return scsa_forward(x, p); }, {n, d},
                                         {PNorm::Two, PNorm::Inf}, opts);
    const double b2 = scsa_bound_2(p, n).value, binf = scsa_bound_inf(p, n).value;
    if (!(est[0].value <= b2)) ++violations;
    if (!(est[1].value <= binf)) ++violations;
    worst = std::max({worst, est[0].value / b2, est[1].value / binf});
  }
  return {violations == 0, "100 instances, " + std::to_string(violations) +
                               " violations, max empirical/bound " + fmt("%.3g", worst)};
}

// 2
Outcome scsa_jacobian_check() {
  double worst = 0.0;
  std::size_t cases = 0;
  for (std::size_t n : {2, 4, 8})
    for (std::size_t d : {4, 8, 16})
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        RngStream rng(seed, 0x4A4143 + 100 * n + d);
        ScsaParams p;
        p.wq = gaussian({d, d}, rng, 1.0 / std::sqrt(static_cast<double>(d)));
        p.wk = gaussian({d, d}, rng, 1.0 / std::sqrt(static_cast<double>(d)));
        p.wv = gaussian({d, d}, rng, 1.0 / std::sqrt(static_cast<double>(d)));
        const Tensor x = gaussian({n, d}, rng, 1.0);
        const Tensor analytic = scsa_jacobian(x, p);
        const Tensor fd = fd_jacobian([&](const Tensor& v) { return scsa_forward(v, p); }, x, 1e-5);
        const double err = max_abs_diff(analytic, fd) /
                           std::max({max_abs(analytic), max_abs(fd), 1e-300});
        worst = std::max(worst, err);
        ++cases;
      }
  return {worst <= 1e-4, std::to_string(cases) + " cases, max relative error " + fmt("%.3e", worst)};
}

// 3
Outcome softmax_bounds() {
  std::size_t violations = 0;
  double max_inf = 0.0, max_ratio = 0.0;
  for (std::size_t n : {2, 4, 16, 64}) {
    RngStream rng(n, 0x534D);
    for (int r = 0; r < 10000; ++r) {
      // Dirichlet(1) rows sharpened by a random temperature to reach the corners.
      const double temp = std::exp(4.0 * rng.uniform() - 2.0);
      Tensor p({n});
      double total = 0.0;
      for (double& v : p.values()) total += (v = std::pow(-std::log(1.0 - rng.uniform()), temp));
      for (double& v : p.values()) v /= total;
      const Tensor jac = softmax_jacobian(p);
      const double inf = operator_norm(jac, PNorm::Inf);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(to_eigen(jac), Eigen::EigenvaluesOnly);
      const double two = eig.eigenvalues().cwiseAbs().maxCoeff();
      const double cap = static_cast<double>(n - 1) / static_cast<double>(n);
      if (!(inf <= 0.5)) ++violations;
      if (!(two <= cap)) ++violations;
      max_inf = std::max(max_inf, inf);
      max_ratio = std::max(max_ratio, two / cap);
    }
  }
  const double equal = operator_norm(softmax_jacobian(Tensor::vector({0.5, 0.5})), PNorm::Inf);
  return {violations == 0 && equal == 0.5,
          "40000 rows, " + std::to_string(violations) + " violations, max inf-norm " + fmt("%.6f", max_inf) +
              ", max 2-norm/((N-1)/N) " + fmt("%.6f", max_ratio) + ", p=[1/2,1/2] gives " + fmt("%.17g", equal)};
}

// 4
Outcome center_norm_constant() {
  double worst = 0.0;
  std::string at4;
  for (std::size_t d : {2, 4, 64, 768}) {
    const NormParams id = NormParams::identity(d);
    RngStream rng(d);
    const Tensor x = gaussian({d}, rng, 1.0);
    const Tensor jac = fd_jacobian([&](const Tensor& v) { return center_norm(v, id); }, x, 1e-3);
    const double measured = sigma_max(jac);
    const double expected = static_cast<double>(d) / static_cast<double>(d - 1);
    worst = std::max(worst, std::abs(measured - expected));
    if (d == 4) at4 = fmt("%.12f", measured);
  }
  return {worst <= 1e-9, "max |measured - D/(D-1)| " + fmt("%.2e", worst) + ", D=4 gives " + at4};
}

// 5
Outcome layer_norm_growth() {
  constexpr double kRatioTol = 1e-6;  // measurement noise on an exact factor of 10
  const NormParams id = NormParams::identity(3);
  std::vector<double> norms;
  for (double sd : {1e-2, 1e-3, 1e-4}) {
    const double z = std::sqrt(1.5);
    const Tensor x = Tensor::vector({1.0 - sd * z, 1.0, 1.0 + sd * z});
    const Tensor jac = fd_jacobian([&](const Tensor& v) { return layer_norm(v, id); }, x, sd * 1e-3);
    norms.push_back(sigma_max(jac));
  }
  const double g1 = norms[1] / norms[0], g2 = norms[2] / norms[1];
  const bool pass = norms[2] > 1e3 && g1 >= 10.0 * (1.0 - kRatioTol) && g2 >= 10.0 * (1.0 - kRatioTol);
  return {pass, "norms " + fmt("%.6g", norms[0]) + ", " + fmt("%.6g", norms[1]) + ", " + fmt("%.6g", norms[2]) +
                    "; growth per decade " + fmt("%.9f", g1) + ", " + fmt("%.9f", g2)};
}

// 6
Outcome activation_constants() {
  auto grid_max = [](Activation a) {
    double best = 0.0;
    const double h = 1e-6;
    for (long i = -1000000; i <= 1000000; ++i) {
      const double x = 1e-5 * static_cast<double>(i);
      best = std::max(best, std::abs((activate(a, x + h) - activate(a, x - h)) / (2 * h)));
    }
    return best;
  };
  const double sig = grid_max(Activation::Sigmoid), tanh = grid_max(Activation::Tanh),
               relu = grid_max(Activation::Relu), gelu = grid_max(Activation::Gelu);
  const bool pass = std::abs(sig - 0.25) <= 1e-6 && std::abs(tanh - 1.0) <= 1e-6 &&
                    std::abs(relu - 1.0) <= 1e-6 && std::abs(gelu - 1.0998) <= 1e-3;
  return {pass, "sigmoid " + fmt("%.8f", sig) + ", tanh " + fmt("%.8f", tanh) + ", relu " + fmt("%.8f", relu) +
                    ", gelu " + fmt("%.8f", gelu)};
}

// 7
Outcome spectral_init_check() {
  RngStream shapes(7, 0x5350);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t r = 1 + shapes.below(96), c = 1 + shapes.below(96);
    RngStream rng(100 + i);
    worst = std::max(worst, std::abs(sigma_max(spectral_init({r, c}, rng)) - 1.0));
  }
  return {worst <= 1e-6, "50 shapes, max |sigma_max - 1| " + fmt("%.2e", worst)};
}

// 8 and 12 share the default certify run.
std::optional<int> g_certify_exit;

Outcome network_bound_check(const Context& ctx) {
  std::size_t violations = 0;
  double worst = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double kappa = 0.05 * k;
    for (std::size_t m = 1; m <= 1024; m = m < 64 ? m + 1 : m * 2) {
      NetworkBoundInputs in;
      in.stage_blocks = {m};
      in.alpha.assign(m, 1.0 / static_cast<double>(m));
      in.lip.assign(m, kappa);
      const LipschitzBound b = network_bound(in);
      const double lhs = b.value, rhs = b.term("exp_kappa");
      if (!(lhs <= rhs * (1.0 + 1e-12))) ++violations;
      worst = std::max(worst, lhs / rhs);
    }
  }
  const fs::path out = ctx.workdir / "certify_a.json";
  g_certify_exit = ctx.run_cli("certify --config " LIPSCERT_ACCEPT_SOURCE_DIR "/configs/toy.json --out " +
                               out.string());
  bool dominated = false;
  std::string net;
  if (*g_certify_exit == 0) {
    const nlohmann::json r = nlohmann::json::parse(slurp(out));
    dominated = r.at("verdict") == "pass";
    for (std::size_t q = 0; q < r.at("network_bound").size(); ++q) {
      const auto& v = r["network_bound"][q]["value"];
      const double bound = v.is_number() ? v.get<double>() : INFINITY;
      const double emp = r["model"]["empirical"][q]["value"].get<double>();
      dominated = dominated && std::isfinite(bound) && emp <= bound;
      net += std::string(q ? "; " : "") + r["norms"][q].get<std::string>() + ": bound " + fmt("%.4g", bound) +
             " vs empirical " + fmt("%.4g", emp);
    }
  }
  return {violations == 0 && *g_certify_exit == 0 && dominated,
          "grid violations " + std::to_string(violations) + " (max ratio " + fmt("%.15f", worst) +
              "); certify exit " + std::to_string(*g_certify_exit) + "; " + net};
}

// 9
Outcome full_model_gradcheck() {
  const DiffOp op = make_registry_op("model", 4, 8, 0);
  const GradCheckReport r = finite_diff_check(op, 1e-5, 1e-4);
  return {r.pass, std::to_string(r.tensors.size()) + " tensors, max relative error " + fmt("%.3e", r.max_rel_error)};
}

// 10 and 11
struct Run {
  Verdict verdict = Verdict::Converged;
  bool nan_flag = false;
  double train_accuracy = 0.0;
  double seconds = 0.0;
};

Run train_run(ModelConfig c, std::uint64_t seed) {
  c.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  Model model(c);
  const SyntheticData data = synth_dataset(c);
  const TrainMetrics m = train(model, data.train, &data.eval, c.train);
  Run r;
  r.verdict = m.verdict();
  r.nan_flag = m.nan_flag;
  r.train_accuracy = m.evals.empty() ? 0.0 : m.evals.back().train_accuracy;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

ModelConfig toy_config() {
  ModelConfig c;
  c.train.steps = 2000;
  c.train.warmup_steps = 0;
  return c;
}

const std::vector<Run>& certified_runs() {
  static const std::vector<Run> runs = [] {
    std::vector<Run> out;
    for (std::uint64_t s = 0; s < 5; ++s) {
      out.push_back(train_run(toy_config(), s));
      std::fprintf(stderr, "  certified seed %llu: %s acc %.4f (%.0f s)\n", static_cast<unsigned long long>(s),
                   verdict_name(out.back().verdict).c_str(), out.back().train_accuracy, out.back().seconds);
    }
    return out;
  }();
  return runs;
}

Outcome warmup_free_stability() {
  bool pass = true;
  std::string detail;
  for (std::size_t s = 0; s < 5; ++s) {
    const Run& r = certified_runs()[s];
    pass = pass && !r.nan_flag && r.train_accuracy >= 0.8 && r.seconds <= 15 * 60;
    detail += (s ? "; " : "") + std::string("seed ") + std::to_string(s) + " acc " + fmt("%.3f", r.train_accuracy) +
              (r.nan_flag ? " NaN" : "") + " " + fmt("%.0f", r.seconds) + "s";
  }
  return {pass, detail};
}

Outcome ablation_mirror() {
  std::size_t lips_bad = 0;
  for (const Run& r : certified_runs()) lips_bad += r.verdict != Verdict::Converged;
  ModelConfig base = toy_config();
  base.norm_kind = NormKind::LayerNorm;
  base.attn_kind = AttentionKind::Dot;
  std::size_t base_bad = 0;
  std::string verdicts;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Run r = train_run(base, s);
    base_bad += r.verdict != Verdict::Converged;
    verdicts += (s ? "," : "") + verdict_name(r.verdict);
    std::fprintf(stderr, "  baseline seed %llu: %s acc %.4f (%.0f s)\n", static_cast<unsigned long long>(s),
                 verdict_name(r.verdict).c_str(), r.train_accuracy, r.seconds);
  }
  return {lips_bad == 0, "certified config non-converged " + std::to_string(lips_bad) +
                             "/5 (gated); layernorm+dot baseline non-converged " + std::to_string(base_bad) +
                             "/5 [" + verdicts + "] (logged only)"};
}

// 12
Outcome determinism(const Context& ctx) {
  const std::string cfg = " --config " LIPSCERT_ACCEPT_SOURCE_DIR "/configs/toy.json";
  const fs::path a = ctx.workdir / "certify_a.json", b = ctx.workdir / "certify_b.json";
  if (!g_certify_exit) g_certify_exit = ctx.run_cli("certify" + cfg + " --out " + a.string());
  const int eb = ctx.run_cli("certify" + cfg + " --out " + b.string(), "LIPSCERT_THREADS=2");
  const bool cert_same = slurp(a) == slurp(b) && !slurp(a).empty();

  const fs::path ta = ctx.workdir / "train_a.csv", tb = ctx.workdir / "train_b.csv";
  const int t1 = ctx.run_cli("train" + cfg + " --steps 200 --seed 7 --out " + ta.string());
  const int t2 = ctx.run_cli("train" + cfg + " --steps 200 --seed 7 --out " + tb.string(), "LIPSCERT_THREADS=3");
  const bool train_same = slurp(ta) == slurp(tb) && !slurp(ta).empty();
  const bool exits = *g_certify_exit == 0 && eb == 0 && t1 == 0 && t2 == 0;
  return {cert_same && train_same && exits,
          std::string("certify reports ") + (cert_same ? "identical" : "DIFFER") + ", train CSVs " +
              (train_same ? "identical" : "DIFFER") + ", exits " + std::to_string(*g_certify_exit) + "/" +
              std::to_string(eb) + "/" + std::to_string(t1) + "/" + std::to_string(t2)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lipscert acceptance suite"};
  Context ctx;
  std::string workdir = "acceptance_artifacts";
  std::vector<int> only;
  app.add_option("--cli", ctx.cli, "Path to the lipscert executable")->required();
  app.add_option("--workdir", workdir, "Directory for CLI outputs")->capture_default_str();
  app.add_option("criteria", only, "Criterion numbers to run (default: all)")->check(CLI::Range(1, 12));
  CLI11_PARSE(app, argc, argv);
  ctx.workdir = fs::absolute(workdir);
  fs::create_directories(ctx.workdir);
  fs::remove(ctx.workdir / "cli.stderr");
  // Verdict lines are mirrored to acceptance.log.
  std::ofstream log(ctx.workdir / "acceptance.log");

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"SCSA bound dominance", scsa_dominance},
      {"SCSA Jacobian vs finite differences", scsa_jacobian_check},
      {"softmax Jacobian norm bounds", softmax_bounds},
      {"CenterNorm constant D/(D-1)", center_norm_constant},
      {"LayerNorm Jacobian growth", layer_norm_growth},
      {"activation Lipschitz constants", activation_constants},
      {"spectral init sigma_max = 1", spectral_init_check},
      {"network bound arithmetic and toy certification", [&] { return network_bound_check(ctx); }},
      {"full-model gradient check", full_model_gradcheck},
      {"warmup-free training stability", warmup_free_stability},
      {"ablation verdict mirror", ablation_mirror},
      {"byte-identical certify/train outputs", [&] { return determinism(ctx); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char head[160];
    std::snprintf(head, sizeof head, "%s [%2d] %s: ", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str());
    char tail[32];
    std::snprintf(tail, sizeof tail, " (%.1f s)", secs);
    const std::string line = head + o.detail + tail;
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    log << line << std::endl;
    failures += !o.pass;
  }
  std::printf("%d failed\n", failures);
  log << failures << " failed\n";
  return failures ? 1 : 0;
}
