#include <cmath>

#include "doctest.h"
#include "autodiff/registry.hpp"
#include "layers/affine.hpp"
#include "unit/oracles.hpp"

using namespace lipscert;

namespace {

DiffOp linear_op(const Tensor& x, const Tensor& w) {
  DiffOp op;
  op.name = "linear";
  op.arg_names = {"x", "w"};
  op.args = {x, w};
  op.forward = [](const DiffOp::Args& a) { return affine(a[0], a[1], Tensor()); };
  op.vjp = [](const DiffOp::Args& a, const Tensor& g) {
    AffineGrads r = affine_vjp(a[0], a[1], false, g);
    return GradRecord{r.dx, {{"w", r.dw}}};
  };
  return op;
}

}  // namespace

TEST_CASE("affine vjp: input gradient W·g and weight gradient x·gᵀ") {
  const Tensor x = Tensor::vector({1.0, 2.0});
  const Tensor w = Tensor::matrix({{1.0, 0.0, -1.0}, {2.0, 3.0, 0.5}});
  const Tensor g = Tensor::vector({0.5, -1.0, 2.0});
  const GradRecord r = vjp(linear_op(x, w), g);
  CHECK(r.input == Tensor::vector({1.0 * 0.5 + 0.0 * -1.0 + -1.0 * 2.0, 2.0 * 0.5 + 3.0 * -1.0 + 0.5 * 2.0}));
  CHECK(r.params.at("w") == Tensor::matrix({{0.5, -1.0, 2.0}, {1.0, -2.0, 4.0}}));
}

TEST_CASE("finite differences of a linear map are exact to O(step²)") {
  RngStream rng(1);
  const GradCheckReport r = finite_diff_check(
      linear_op(oracle::random_tensor({4, 6}, rng), oracle::random_tensor({6, 5}, rng)), 1e-5, 1e-9);
  CHECK(r.pass);
  CHECK(r.max_rel_error < 1e-9);
  CHECK(r.tensors.size() == 2);
  CHECK(r.tensors[1].checked == 30);
}

TEST_CASE("relu kinks are excluded, smooth points pass") {
  DiffOp op = make_registry_op("relu", 3, 4, 0);
  op.args[0] = Tensor::matrix({{0.5, -0.2, 0.0, 0.3}, {-1.0, 0.11, 2.0, -0.15}, {0.0005, 1.0, -3.0, 0.4}});
  const GradCheckReport r = finite_diff_check(op, 1e-5, 1e-4);
  CHECK(r.pass);
  CHECK(r.tensors[0].excluded == 2);
  CHECK(r.tensors[0].checked == 10);
}

TEST_CASE("centernorm passes at tol 1e-6") {
  CHECK(finite_diff_check(make_registry_op("centernorm", 4, 8, 3), 1e-5, 1e-6).pass);
}

TEST_CASE("every registered module passes at tol 1e-4 with step 1e-5") {
  for (const std::string& name : registry_modules()) {
    for (std::uint64_t seed : {1u, 2u}) {
      const GradCheckReport r = finite_diff_check(make_registry_op(name, 4, 8, seed), 1e-5, 1e-4, seed);
      INFO(format_report(r));
      CHECK(r.pass);
    }
  }
}

TEST_CASE("a broken vjp is caught") {
  DiffOp op = make_registry_op("tanh", 3, 4, 0);
  op.vjp = [](const DiffOp::Args& a, const Tensor& g) { return GradRecord{g, {}}; };
  CHECK_FALSE(finite_diff_check(op, 1e-5, 1e-4).pass);
}

TEST_CASE("vjp is linear in the cotangent") {
  for (const char* name : {"scsa", "multihead", "ffn", "conv", "layernorm", "model"}) {
    const DiffOp op = make_registry_op(name, 4, 8, 5);
    const Tensor y = op.forward(op.args);
    RngStream rng(9);
    const Tensor g1 = oracle::random_tensor(y.shape(), rng);
    const Tensor g2 = oracle::random_tensor(y.shape(), rng);
    const double a = 0.7, b = -1.3;
    const GradRecord r1 = vjp(op, g1), r2 = vjp(op, g2), r12 = vjp(op, a * g1 + b * g2);
    auto close = [](const Tensor& lhs, const Tensor& rhs) {
      return max_abs_diff(lhs, rhs) <= 1e-10 * std::max(1.0, max_abs(rhs));
    };
    CHECK(close(r12.input, a * r1.input + b * r2.input));
    for (const auto& [key, t] : r12.params) {
      INFO(name << " " << key);
      CHECK(close(t, a * r1.params.at(key) + b * r2.params.at(key)));
    }
  }
}

TEST_CASE("vjp rejects mismatched or non-finite cotangents") {
  const DiffOp op = make_registry_op("affine", 3, 4, 0);
  CHECK_THROWS_AS(vjp(op, Tensor({3, 5})), DimensionError);
  Tensor bad({3, 4});
  bad[2] = NAN;
  CHECK_THROWS_AS(vjp(op, bad), NumericError);
  CHECK_THROWS_AS(make_registry_op("sqsa", 4, 8, 0), std::invalid_argument);
  CHECK_THROWS_AS(finite_diff_check(op, 0.0, 1e-4), std::invalid_argument);
}

TEST_CASE("large operations switch to random probes") {
  const DiffOp op = make_registry_op("ffn", 8, 48, 4);
  const GradCheckReport r = finite_diff_check(op, 1e-5, 1e-4);
  CHECK(r.pass);
  for (const TensorCheck& t : r.tensors) {
    CHECK(t.probed);
    CHECK(t.checked == kProbeDirections);
  }
  const std::string text = format_report(r);
  CHECK(text.find("result: PASS") != std::string::npos);
}
