#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "gacfas/model.hpp"

using namespace gacfas;
using gacfas::testing::random_batch;
using gacfas::testing::random_theta;

namespace {

double max_rel_diff(const Vec64& g, const Vec64& fd) {
  double m = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    m = std::max(m, std::abs(g[j] - fd[j]) / (1.0 + std::abs(fd[j])));
  }
  return m;
}

double max_abs_diff(const Vec64& a, const Vec64& b) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
  return m;
}

}  // namespace

TEST_CASE("spec validation and layout") {
  CHECK_THROWS_AS(MlpSpec({{2}, Activation::relu}).validate(), ContractError);
  CHECK_THROWS_AS(MlpSpec({{2, 0, 2}, Activation::relu}).validate(), ContractError);
  CHECK_THROWS_AS(MlpSpec({{2, 4, 1}, Activation::relu}).validate(), ContractError);
  const MlpSpec spec{{2, 3, 2}, Activation::tanh};
  CHECK(spec.param_count() == 2 * 3 + 3 + 3 * 2 + 2);
  const auto layout = param_layout(spec);
  REQUIRE(layout.size() == 2);
  CHECK(layout[0].weight_offset == 0);
  CHECK(layout[0].bias_offset == 6);
  CHECK(layout[1].weight_offset == 9);
  CHECK(layout[1].bias_offset == 15);
  CHECK_THROWS_AS(ParamVector::from_theta(spec, Vec64(3)), ContractError);
}

TEST_CASE("init_params") {
  const MlpSpec spec{{200, 100, 2}, Activation::relu};
  Prng a(5), b(5);
  const ParamVector p = init_params(spec, a);
  CHECK(init_params(spec, b).theta == p.theta);
  for (const auto& blk : p.layout) {
    for (std::size_t j = 0; j < blk.fan_out; ++j) CHECK(p.theta[blk.bias_offset + j] == 0.0);
  }
  const auto& first = p.layout[0];
  const std::size_t n = first.weight_size();
  REQUIRE(n >= 10000);
  double mean = 0.0;
  for (std::size_t j = 0; j < n; ++j) mean += p.theta[first.weight_offset + j];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double d = p.theta[first.weight_offset + j] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n - 1);
  CHECK(std::abs(var / (2.0 / 200.0) - 1.0) < 0.2);
}

TEST_CASE("forward on hand-built parameters") {
  SUBCASE("linear identity") {
    const MlpSpec spec{{3, 3}, Activation::relu};
    Vec64 theta(spec.param_count(), 0.0);
    for (std::size_t i = 0; i < 3; ++i) theta[i * 3 + i] = 1.0;
    Matrix x(3, 3);
    for (std::size_t i = 0; i < 3; ++i) x(i, i) = 1.0;
    CHECK(forward(spec, theta, x) == x);
  }
  SUBCASE("zero parameters") {
    const MlpSpec spec{{2, 5, 4, 2}, Activation::tanh};
    Prng prng(1);
    const Batch b = random_batch(6, 2, 1, prng);
    const Matrix z = forward(spec, Vec64(spec.param_count(), 0.0), b.inputs);
    CHECK(std::all_of(z.data.begin(), z.data.end(), [](double v) { return v == 0.0; }));
  }
  SUBCASE("dead relu layer passes the output bias through") {
    const MlpSpec spec{{2, 3, 2}, Activation::relu};
    Vec64 theta(spec.param_count(), 0.0);
    const auto layout = param_layout(spec);
    for (std::size_t j = 0; j < 3; ++j) theta[layout[0].bias_offset + j] = -1.0;
    for (std::size_t j = 0; j < 6; ++j) theta[layout[1].weight_offset + j] = 0.7;
    theta[layout[1].bias_offset] = 0.25;
    theta[layout[1].bias_offset + 1] = -1.5;
    Matrix x(2, 2);
    x(0, 0) = 0.1;
    x(1, 1) = -0.2;
    const Matrix z = forward(spec, theta, x);
    for (std::size_t r = 0; r < 2; ++r) {
      CHECK(z(r, 0) == 0.25);
      CHECK(z(r, 1) == -1.5);
    }
  }
  const MlpSpec spec{{2, 2}, Activation::relu};
  CHECK_THROWS_AS(forward(spec, Vec64(spec.param_count()), Matrix(1, 3)), ContractError);
}

TEST_CASE("loss at zero parameters is ln 2") {
  const MlpSpec spec{{2, 8, 2}, Activation::relu};
  Prng prng(2);
  const Batch b = random_batch(16, 2, 1, prng);
  const LossGrad lg = loss_and_grad(spec, Vec64(spec.param_count(), 0.0), b);
  CHECK(lg.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("analytic gradient matches finite differences on a 2-8-2 net") {
  for (Activation act : {Activation::tanh, Activation::relu}) {
    const MlpSpec spec{{2, 8, 2}, act};
    Prng prng(3);
    int checked = 0;
    while (checked < 5) {
      const Vec64 theta = random_theta(spec, prng);
      const Batch b = random_batch(16, 2, 1, prng);
      if (act == Activation::relu && min_abs_preactivation(spec, theta, b.inputs) < 1e-3) continue;
      const Vec64 g = loss_and_grad(spec, theta, b).grad;
      CHECK(max_rel_diff(g, finite_diff_grad(spec, theta, b, 1e-6)) <= 1e-5);
      ++checked;
    }
  }
}

TEST_CASE("finite differences on a linear model") {
  const MlpSpec spec{{3, 2}, Activation::relu};
  Prng prng(4);
  const Vec64 theta = random_theta(spec, prng);
  const Batch b = random_batch(10, 3, 1, prng);
  const Vec64 g = loss_and_grad(spec, theta, b).grad;
  CHECK(max_rel_diff(g, finite_diff_grad(spec, theta, b, 1e-6)) <= 1e-7);
  CHECK_THROWS_AS(finite_diff_grad(spec, theta, b, 0.0), ContractError);
  CHECK_THROWS_AS(finite_diff_grad(spec, theta, Batch{Matrix(0, 3), {}, {}}, 1e-6), ContractError);
}

TEST_CASE("finite-difference error shrinks about 4x when h halves") {
  const MlpSpec spec{{2, 8, 8, 2}, Activation::tanh};
  Prng prng(11);
  for (int rep = 0; rep < 5; ++rep) {
    const Vec64 theta = random_theta(spec, prng);
    const Batch b = random_batch(16, 2, 1, prng);
    const Vec64 g = loss_and_grad(spec, theta, b).grad;
    const double e1 = max_abs_diff(g, finite_diff_grad(spec, theta, b, 2e-2));
    const double e2 = max_abs_diff(g, finite_diff_grad(spec, theta, b, 1e-2));
    const double ratio = e1 / e2;
    CHECK(ratio > 3.0);
    CHECK(ratio < 5.0);
  }
}

TEST_CASE("duplicating the batch leaves loss and gradient unchanged") {
  const MlpSpec spec{{2, 8, 2}, Activation::tanh};
  Prng prng(12);
  const Vec64 theta = random_theta(spec, prng);
  const Batch b = random_batch(16, 2, 1, prng);
  const std::vector<Batch> parts{b, b};
  const Batch doubled = concat(parts);
  const LossGrad a = loss_and_grad(spec, theta, b);
  const LossGrad d = loss_and_grad(spec, theta, doubled);
  CHECK(d.loss == doctest::Approx(a.loss).epsilon(1e-13));
  CHECK(max_abs_diff(a.grad, d.grad) <= 1e-13);
}

TEST_CASE("row permutation leaves loss exactly unchanged") {
  const MlpSpec spec{{2, 8, 2}, Activation::relu};
  Prng prng(13);
  const Vec64 theta = random_theta(spec, prng);
  const Batch b = random_batch(31, 2, 1, prng);
  std::vector<std::size_t> perm(b.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (int rep = 0; rep < 20; ++rep) {
    for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[prng.below(i + 1)]);
    const Batch p = b.select_rows(perm);
    CHECK(loss(spec, theta, p) == loss(spec, theta, b));
    CHECK(max_abs_diff(loss_and_grad(spec, theta, p).grad, loss_and_grad(spec, theta, b).grad) <=
          1e-14);
  }
}

TEST_CASE("loss is positive for finite parameters") {
  const MlpSpec spec{{2, 2}, Activation::relu};
  Batch b{Matrix(1, 2), {1}, {0}};
  b.inputs(0, 0) = 1.0;
  Vec64 theta(spec.param_count(), 0.0);
  theta[spec.param_count() - 1] = 30.0;  // class-1 bias: very confident, correct
  const double l = loss(spec, theta, b);
  CHECK(l > 0.0);
  CHECK(l < 1e-12);
}

TEST_CASE("batch validation") {
  Batch b{Matrix(2, 2), {0, 1}, {0, 0}};
  CHECK_NOTHROW(b.validate(2, 2));
  CHECK_THROWS_AS(b.validate(3, 2), ContractError);
  b.labels[1] = 2;
  CHECK_THROWS_AS(b.validate(2, 2), ContractError);
  b.labels[1] = 1;
  b.domain_ids[0] = 3;
  CHECK_THROWS_AS(b.validate(2, 2, 2), ContractError);
}

TEST_CASE("gradient check suite") {
  const auto tanh_r = gradient_check_suite({{2, 8, 8, 2}, Activation::tanh}, 10, 16, 1e-6, 1e-5, 1);
  CHECK(tanh_r.instances == 10);
  CHECK(tanh_r.passed);
  const auto relu_r = gradient_check_suite({{2, 8, 8, 2}, Activation::relu}, 10, 16, 1e-6, 1e-5, 1);
  CHECK(relu_r.passed);
}
