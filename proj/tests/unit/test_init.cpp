#include <cmath>

#include "core/linalg.hpp"
#include "doctest.h"
#include "init/init.hpp"
#include "unit/oracles.hpp"

using namespace lipscert;

TEST_CASE("xavier variance") {
  RngStream a(61), b(61);
  CHECK(xavier_init({8, 8}, a) == xavier_init({8, 8}, b));
  // 1×1: variance parameter 2/(1+1) = 1.
  RngStream r(62);
  double sq = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double v = xavier_init({1, 1}, r)[0];
    sq += v * v;
  }
  CHECK(sq / 20000 == doctest::Approx(1.0).epsilon(0.05));
  const Tensor w = xavier_init({512, 512}, r);
  double mean = 0.0, var = 0.0;
  for (double v : w.values()) mean += v;
  mean /= w.size();
  for (double v : w.values()) var += (v - mean) * (v - mean);
  var /= w.size() - 1;
  CHECK(std::abs(var - 2.0 / 1024.0) < 0.1 * 2.0 / 1024.0);
  CHECK_THROWS_AS(xavier_init({3}, r), DimensionError);
}

TEST_CASE("spectral init has unit largest singular value") {
  RngStream rng(63);
  const Tensor w = spectral_init({64, 64}, rng);
  CHECK(std::abs(oracle::svd_max(w) - 1.0) < 1e-6);
  for (int t = 0; t < 50; ++t) {
    const std::size_t m = 1 + rng.below(96), n = 1 + rng.below(96);
    CHECK(std::abs(oracle::svd_max(spectral_init({m, n}, rng)) - 1.0) < 1e-6);
  }
  CHECK(spectral_normalize(Tensor::identity(5)) == Tensor::identity(5));
  const Tensor draw = oracle::random_tensor({6, 4}, rng);
  CHECK(max_abs_diff(spectral_normalize(draw), spectral_normalize(3.7 * draw)) < 1e-12);
  CHECK_THROWS_AS(spectral_normalize(Tensor({3, 3})), NumericError);
}

TEST_CASE("truncated normal") {
  RngStream rng(64);
  const Tensor w = trunc_normal_init({100, 1000}, 0.02, -0.04, 0.04, rng);
  double mean = 0.0;
  for (double v : w.values()) {
    CHECK(v >= -0.04);
    CHECK(v <= 0.04);
    mean += v;
  }
  mean /= w.size();
  // Std of the truncated law is below 0.02, so 3 × 0.02/√n is conservative.
  CHECK(std::abs(mean) < 3.0 * 0.02 / std::sqrt(static_cast<double>(w.size())));
  CHECK(max_abs(trunc_normal_init({4, 4}, 0.0, -1, 1, rng)) == 0.0);
}

TEST_CASE("init specs are deterministic and depthwise kernels are per-channel unit") {
  for (InitKind k : {InitKind::Xavier, InitKind::TruncNormal, InitKind::Spectral}) {
    InitSpec s{k, 7, 5};
    s.seed = 9;
    CHECK(initialize(s) == initialize(s));
    CHECK(parse_init_kind(init_kind_name(k)) == k);
  }
  CHECK_THROWS(initialize(InitSpec{InitKind::Xavier, 0, 3}));
  RngStream rng(65);
  const Tensor dw = init_depthwise(6, 49, InitKind::Spectral, rng);
  for (std::size_t c = 0; c < 6; ++c) {
    double s = 0.0;
    for (std::size_t t = 0; t < 49; ++t) s += dw(c, t) * dw(c, t);
    CHECK(std::sqrt(s) == doctest::Approx(1.0).epsilon(1e-10));
  }
}
