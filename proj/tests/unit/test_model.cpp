#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "autodiff/registry.hpp"
#include "model/config.hpp"
#include "model/dataset.hpp"
#include "model/model.hpp"
#include "model/train.hpp"
#include "model/weights.hpp"
#include "unit/oracles.hpp"

using namespace lipscert;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.stage_depths = {1, 0, 0, 0};
  c.droppath = 0.0;
  return c;
}

std::size_t layer_index(const Model& m, const std::string& name) {
  for (std::size_t i = 0; i < m.layers().size(); ++i) {
    if (m.layers()[i].name == name) return i;
  }
  FAIL("no layer " << name);
  return 0;
}

}  // namespace

TEST_CASE("config parses, round-trips and fails closed") {
  const ModelConfig def;
  const ModelConfig back = parse_config(config_to_json(def));
  CHECK(config_to_json(back) == config_to_json(def));

  CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "epsilon": 1e-6})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "train": {"stpes": 3}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"channels": [16, 32, 64, 128]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 2})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "tau": "12"})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);

  const ModelConfig fixed = parse_config(R"({"schema_version": 1, "alpha": 0.3, "norm_kind": "layernorm"})");
  CHECK(*fixed.alpha == 0.3);
  CHECK(fixed.norm_kind == NormKind::LayerNorm);
  CHECK_FALSE(parse_config(R"({"schema_version": 1, "alpha": "auto"})").alpha.has_value());
}

TEST_CASE("config rejects a resolution the stages cannot halve") {
  ModelConfig c;
  c.patch_size = 4;  // 16 / (4 · 2³) is not an integer
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(Model{c}, ConfigError);
  c.patch_size = 2;
  CHECK_NOTHROW(c.validate());
  c.channels = {16, 32, 48, 128};
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("auto alpha is one over the total block count in every block") {
  const Model m{ModelConfig{}};
  std::size_t residuals = 0;
  for (const Layer& l : m.layers()) {
    if (!l.is_residual()) continue;
    ++residuals;
    for (double a : l.wrs.alpha.values()) CHECK(a == 1.0 / 5.0);
  }
  CHECK(residuals == 2 * 5);
  CHECK(m.forward(Tensor(m.input_shape())).shape() == Shape{10});
}

TEST_CASE("parameter count matches a hand count for depths [1,0,0,0]") {
  const Model m{small_config()};
  // patch embed: 2·2·3 → 16
  const std::size_t embed = 2 * 2 * 3 * 16 + 16;
  // conv: depthwise 7×7 per channel + bias, pointwise 16×16 + bias
  const std::size_t conv = 16 * 49 + 16 + 16 * 16 + 16;
  // one head of width 16: wq, wk, wv, ν, τ; w_out; CenterNorm γ, β; α
  const std::size_t attn = 3 * 16 * 16 + 2 + 16 * 16 + 2 * 16 + 16;
  // FFN 16 → 64 → 16 with biases; CenterNorm; α
  const std::size_t ffn = 16 * 64 + 64 + 64 * 16 + 16 + 2 * 16 + 16;
  // merges 2×2 stride 2: 16→32, 32→64, 64→128
  const std::size_t merges = (4 * 16 * 32 + 32) + (4 * 32 * 64 + 64) + (4 * 64 * 128 + 128);
  const std::size_t head = 128 * 10 + 10;
  CHECK(m.param_count() == embed + conv + attn + ffn + merges + head);
  CHECK(m.param_count() == 49052);
}

TEST_CASE("layernorm and dot-product baselines build") {
  ModelConfig c = small_config();
  c.norm_kind = NormKind::LayerNorm;
  c.attn_kind = AttentionKind::Dot;
  const Model m{c};
  RngStream rng(3);
  const Tensor y = m.forward(oracle::random_tensor(m.input_shape(), rng));
  CHECK(y.all_finite());
}

TEST_CASE("residual block examples") {
  ModelConfig c = small_config();
  c.droppath = 1.0;
  Model m{c};
  const std::size_t ai = layer_index(m, "stage0.block0.attn");
  RngStream rng(11);
  const Tensor x = oracle::random_tensor({1, 8, 8, 16}, rng);
  const Tensor cn = center_norm(x, NormParams::identity(16));

  SUBCASE("alpha = 0 leaves CenterNorm(x)") {
    m.layers()[ai].wrs.alpha.fill(0.0);
    CHECK(max_abs_diff(m.forward_range(x, ai, ai + 1), cn) < 1e-14);
  }
  SUBCASE("p = 1 in training leaves CenterNorm(x)") {
    Tape tape;
    ForwardOptions fo;
    fo.training = true;
    fo.tape = &tape;
    m.forward(oracle::random_tensor({1, 16, 16, 3}, rng), fo);
    for (std::size_t i = 0; i + 1 < m.layers().size(); ++i) {
      if (!m.layers()[i].is_residual()) continue;
      const Tensor& in = tape.layers[i].input;
      CHECK(max_abs_diff(tape.layers[i + 1].input, center_norm(in, m.layers()[i].norm)) < 1e-12);
    }
  }
}

TEST_CASE("residual layers match the composition of their sub-ops in every placement") {
  RngStream rng(12);
  for (NormPlacement pl : {NormPlacement::Wrap, NormPlacement::Pre, NormPlacement::Branch}) {
    ModelConfig c = small_config();
    c.norm_placement = pl;
    Model m{c};
    const std::size_t ai = layer_index(m, "stage0.block0.attn");
    const std::size_t fi = layer_index(m, "stage0.block0.ffn");
    Layer& la = m.layers()[ai];
    Layer& lf = m.layers()[fi];
    for (double& g : la.norm.gamma.values()) g = 1.0 + 0.3 * rng.normal();
    for (double& b : lf.norm.beta.values()) b = 0.3 * rng.normal();
    for (double& a : la.wrs.alpha.values()) a = 0.5 * rng.normal();
    const Tensor x = oracle::random_tensor({2, 8, 8, 16}, rng);
    const Tensor xs = x.reshaped({2, 64, 16});

    auto compose = [&](const Layer& l, auto f) -> Tensor {
      Tensor alpha_b({2, 64, 16});
      for (std::size_t i = 0; i < alpha_b.size(); ++i) alpha_b[i] = l.wrs.alpha[i % 16];
      switch (pl) {
        case NormPlacement::Wrap: return center_norm(xs + hadamard(alpha_b, f(xs)), l.norm);
        case NormPlacement::Pre: return xs + hadamard(alpha_b, f(center_norm(xs, l.norm)));
        case NormPlacement::Branch: break;
      }
      return xs + hadamard(alpha_b, center_norm(f(xs), l.norm));
    };
    const Tensor ya = compose(la, [&](const Tensor& v) {
      return multi_head_attention(v, la.heads, la.w_out, AttentionKind::Scsa);
    });
    const Tensor yf = compose(lf, [&](const Tensor& v) { return ffn_forward(v, lf.ffn); });
    CHECK(max_abs_diff(m.forward_range(x, ai, ai + 1), ya.reshaped(x.shape())) < 1e-12);
    CHECK(max_abs_diff(m.forward_range(x, fi, fi + 1), yf.reshaped(x.shape())) < 1e-12);
  }
}

TEST_CASE("full-model vjp passes the finite-difference check") {
  const ModelConfig c = gradcheck_model_config(0);
  RngStream rng(5);
  const Tensor x = oracle::random_tensor({2, 16, 16, 3}, rng);
  SUBCASE("training mode with DropPath") {
    const GradCheckReport r = finite_diff_check(model_op(Model{c}, x, true, 3), 1e-5, 1e-4, 1);
    INFO(format_report(r));
    CHECK(r.pass);
  }
  SUBCASE("pre and branch placements, layernorm and dot attention") {
    for (int v = 0; v < 3; ++v) {
      ModelConfig cv = c;
      if (v == 0) cv.norm_placement = NormPlacement::Pre;
      if (v == 1) cv.norm_placement = NormPlacement::Branch;
      if (v == 2) {
        cv.norm_kind = NormKind::LayerNorm;
        cv.attn_kind = AttentionKind::Dot;
      }
      const GradCheckReport r = finite_diff_check(model_op(Model{cv}, x, false, 0), 1e-5, 1e-4, 2);
      INFO(format_report(r));
      CHECK(r.pass);
    }
  }
}

TEST_CASE("eval forward is deterministic; training forward is deterministic per step") {
  const Model m{ModelConfig{}};
  RngStream rng(6);
  const Tensor x = oracle::random_tensor({8, 16, 16, 3}, rng);
  CHECK(m.forward(x) == m.forward(x));
  ForwardOptions t0;
  t0.training = true;
  t0.step = 4;
  CHECK(m.forward(x, t0) == m.forward(x, t0));
  const Model again{ModelConfig{}};
  CHECK(again.forward(x) == m.forward(x));
}

TEST_CASE("cross entropy with label smoothing") {
  const Tensor logits = Tensor::matrix({{0.0, 0.0}, {2.0, -1.0}});
  const LossResult r = cross_entropy(logits, {0, 1}, 0.1);
  const double l0 = std::log(2.0);
  const double lse = std::log(std::exp(2.0) + std::exp(-1.0));
  const double l1 = 0.95 * (lse + 1.0) + 0.05 * (lse - 2.0);
  CHECK(r.loss == doctest::Approx((l0 + l1) / 2).epsilon(1e-14));
  const Tensor jac = oracle::fd_jacobian(
      [&](const Tensor& z) { return Tensor({1}, cross_entropy(z, {0, 1}, 0.1).loss); }, logits, 1e-6);
  for (std::size_t i = 0; i < 4; ++i) CHECK(r.dlogits[i] == doctest::Approx(jac(0, i)).epsilon(1e-8));
}

TEST_CASE("synthetic dataset") {
  SUBCASE("split and determinism") {
    const SyntheticData a = synth_dataset(10, 100, 16, 3, 0.5, 9);
    const SyntheticData b = synth_dataset(10, 100, 16, 3, 0.5, 9);
    CHECK(a.train.size() == 800);
    CHECK(a.eval.size() == 200);
    CHECK(a.train.images == b.train.images);
    CHECK(a.eval.labels == b.eval.labels);
    CHECK(synth_dataset(10, 100, 16, 3, 0.5, 10).templates != a.templates);
    CHECK_THROWS_AS(synth_dataset(1, 10, 16, 3, 0.5, 0), ConfigError);
  }
  SUBCASE("noise 0: nearest template classifies everything") {
    const SyntheticData d = synth_dataset(10, 20, 16, 3, 0.0, 4);
    const std::size_t per = 16 * 16 * 3;
    for (const Dataset* set : {&d.train, &d.eval}) {
      for (std::size_t i = 0; i < set->size(); ++i) {
        int best = -1;
        double best_d = INFINITY;
        for (int c = 0; c < 10; ++c) {
          double s = 0.0;
          for (std::size_t j = 0; j < per; ++j) {
            const double e = set->images[i * per + j] - d.templates[c * per + j];
            s += e * e;
          }
          if (s < best_d) best_d = s, best = c;
        }
        CHECK(best == set->labels[i]);
      }
    }
  }
  SUBCASE("noise 0.5: closed-form least-squares probe reaches 90%") {
    const SyntheticData d = synth_dataset(10, 100, 16, 3, 0.5, 1);
    const Eigen::Index p = 16 * 16 * 3;
    auto design = [&](const Dataset& s) {
      Eigen::MatrixXd x(static_cast<Eigen::Index>(s.size()), p + 1);
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < p; ++j) x(i, j) = s.images[static_cast<std::size_t>(i * p + j)];
        x(i, p) = 1.0;
      }
      return x;
    };
    const Eigen::MatrixXd xt = design(d.train);
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(xt.rows(), 10);
    for (Eigen::Index i = 0; i < xt.rows(); ++i) y(i, d.train.labels[static_cast<std::size_t>(i)]) = 1.0;
    const Eigen::MatrixXd w = xt.completeOrthogonalDecomposition().solve(y);
    const Eigen::MatrixXd scores = design(d.eval) * w;
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
      Eigen::Index arg;
      scores.row(i).maxCoeff(&arg);
      correct += arg == d.eval.labels[static_cast<std::size_t>(i)];
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(scores.rows()) >= 0.90);
  }
}

TEST_CASE("learning-rate schedules") {
  TrainConfig t;
  t.steps = 100;
  t.lr = 1.0;
  CHECK(learning_rate(t, 0) == 1.0);
  CHECK(learning_rate(t, 50) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(learning_rate(t, 99) < 1e-3);
  t.warmup_steps = 10;
  CHECK(learning_rate(t, 0) == doctest::Approx(0.1));
  CHECK(learning_rate(t, 9) == doctest::Approx(1.0));
  CHECK(learning_rate(t, 10) == doctest::Approx(1.0));
  t.schedule = Schedule::Constant;
  CHECK(learning_rate(t, 80) == 1.0);
}

TEST_CASE("lr = 0 keeps the loss constant") {
  ModelConfig c = small_config();
  c.dataset.n_per_class = 5;
  Model m{c};
  const SyntheticData d = synth_dataset(c);
  TrainConfig t = c.train;
  t.steps = 6;
  t.lr = 0.0;
  const TrainMetrics r = train(m, d.train, nullptr, t);
  REQUIRE(r.steps.size() == 6);
  for (const StepMetrics& s : r.steps) {
    CHECK(s.loss == doctest::Approx(r.steps[0].loss).epsilon(1e-12));
  }
}

TEST_CASE("one step on one sample lowers that sample's loss") {
  ModelConfig c = small_config();
  Model m{c};
  const SyntheticData d = synth_dataset(c);
  Dataset one;
  one.images = d.train.gather({0});
  one.labels = {d.train.labels[0]};
  auto loss = [&] { return cross_entropy(m.forward(one.images), one.labels, 0.1).loss; };
  const double before = loss();
  TrainConfig t = c.train;
  t.steps = 1;
  t.lr = 1e-3;
  t.schedule = Schedule::Constant;
  train(m, one, nullptr, t);
  CHECK(loss() < before);
}

TEST_CASE("training is deterministic and records metrics") {
  ModelConfig c = small_config();
  c.droppath = 0.1;
  c.dataset.n_per_class = 10;
  TrainConfig t = c.train;
  t.steps = 4;
  t.batch_size = 16;
  auto run = [&] {
    Model m{c};
    const SyntheticData d = synth_dataset(c);
    return metrics_csv(train(m, d.train, &d.eval, t));
  };
  const std::string a = run();
  CHECK(a == run());
  CHECK(a.rfind("step,loss,max_act,grad_norm,nan_flag\n", 0) == 0);
  CHECK(std::count(a.begin(), a.end(), '\n') == 5);
}

TEST_CASE("frozen scalars stay fixed and clamped gamma stays in range") {
  ModelConfig c = small_config();
  c.dataset.n_per_class = 5;
  c.freeze_scalars = true;
  Model m{c};
  const SyntheticData d = synth_dataset(c);
  std::vector<NamedTensor> before = model_weights(m);
  TrainConfig t = c.train;
  t.steps = 3;
  t.lr = 0.5;
  train(m, d.train, nullptr, t);
  const std::vector<NamedTensor> after = model_weights(m);
  for (std::size_t i = 0; i < before.size(); ++i) {
    const std::string& n = before[i].first;
    const bool scalar = n.ends_with(".nu") || n.ends_with(".tau") || n.ends_with(".alpha") ||
                        n.ends_with(".gamma") || n.ends_with(".beta");
    if (scalar) CHECK(before[i].second == after[i].second);
  }

  c.freeze_scalars = false;
  c.clamp_gamma = true;
  Model clamped{c};
  train(clamped, d.train, nullptr, t);
  for (const Layer& l : clamped.layers()) {
    for (double g : l.norm.gamma.values()) CHECK((g >= kGammaClampMin && g <= kGammaClampMax));
  }
}

TEST_CASE("verdicts") {
  TrainMetrics m;
  for (std::size_t i = 0; i < 200; ++i) m.append({i, 2.0 - 0.005 * static_cast<double>(i), 0, 0, false});
  CHECK(m.verdict() == Verdict::Converged);
  TrainMetrics flat;
  for (std::size_t i = 0; i < 200; ++i) flat.append({i, 2.0, 0, 0, false});
  CHECK(flat.verdict() == Verdict::NotConverged);
  TrainMetrics spike = m;
  spike.append({200, 25.0, 0, 0, false});
  CHECK(spike.verdict() == Verdict::Diverged);
  TrainMetrics nan = m;
  nan.append({200, NAN, 0, 0, true});
  CHECK(nan.nan_flag);
  CHECK(nan.verdict() == Verdict::Diverged);
}

TEST_CASE("ablation axes") {
  const ModelConfig base;
  CHECK(apply_ablation(base, AblationAxis::Norm, "layernorm").norm_kind == NormKind::LayerNorm);
  CHECK(apply_ablation(base, AblationAxis::Attn, "dot").attn_kind == AttentionKind::Dot);
  CHECK(*apply_ablation(base, AblationAxis::Alpha, "0.4").alpha == 0.4);
  CHECK(apply_ablation(base, AblationAxis::DropPath, "0.2").droppath == 0.2);
  CHECK(apply_ablation(base, AblationAxis::Warmup, "250").train.warmup_steps == 250);
  CHECK(apply_ablation(base, AblationAxis::Init, "xavier").init_kind == InitKind::Xavier);
  CHECK_THROWS_AS(apply_ablation(base, AblationAxis::Norm, "batchnorm"), ConfigError);
  CHECK_THROWS_AS(apply_ablation(base, AblationAxis::Warmup, "2.5"), ConfigError);
  CHECK_THROWS_AS(parse_ablation_axis("alpah"), ConfigError);

  ModelConfig tiny = small_config();
  tiny.dataset.n_per_class = 5;
  tiny.train.steps = 2;
  const auto rows = ablation_sweep(AblationAxis::DropPath, tiny, {"0.1"});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].steps_run == 2);
  const std::string csv = ablation_csv(AblationAxis::DropPath, rows);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
}

TEST_CASE("weight files are bit-exact and round-trip") {
  Tensor t({2}, std::vector<double>{1.0, -2.5});
  std::ostringstream os;
  write_weights({{"ab", t}}, os);
  const std::string bytes = os.str();
  const std::string expect = std::string("LIPS") + std::string("\x01\0\0\0", 4) + std::string("\x01\0\0\0", 4) +
                             std::string("\x02\0\0\0", 4) + "ab" + std::string("\x01\0\0\0", 4) +
                             std::string("\x02\0\0\0\0\0\0\0", 8) +
                             std::string("\0\0\0\0\0\0\xf0\x3f", 8) + std::string("\0\0\0\0\0\0\x04\xc0", 8);
  CHECK(bytes == expect);

  Model a{small_config()};
  ModelConfig other = small_config();
  other.seed = 77;
  Model b{other};
  std::stringstream ss;
  write_weights(model_weights(a), ss);
  assign_weights(b, read_weights(ss));
  RngStream rng(8);
  const Tensor x = oracle::random_tensor({2, 16, 16, 3}, rng);
  CHECK(a.forward(x) == b.forward(x));

  std::istringstream bad(std::string("LIPZ") + std::string(8, '\0'));
  CHECK_THROWS(read_weights(bad));
  Model big{ModelConfig{}};
  CHECK_THROWS_AS(assign_weights(big, model_weights(a)), DimensionError);
}
