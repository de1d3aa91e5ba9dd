#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "gacfas/datagen.hpp"
#include "gacfas/diagnostics.hpp"
#include "gacfas/io.hpp"
#include "oracles.hpp"

using namespace gacfas;
using gacfas::testing::QuadraticObjective;
using gacfas::testing::random_batch;
using gacfas::testing::random_theta;

namespace {

SourceSet equal_size_source(std::size_t k, std::size_t n, std::uint64_t seed) {
  std::vector<DomainSpec> specs;
  for (std::size_t i = 0; i < k; ++i) {
    DomainSpec d;
    d.rotation = 0.4 * static_cast<double>(i);
    d.translation = {0.1 * static_cast<double>(i), 0.0};
    d.n_samples = n;
    d.seed = seed + i;
    specs.push_back(d);
  }
  return build_source_set(specs);
}

}  // namespace

TEST_CASE("perturbed loss and surrogate gap on the scalar quadratic") {
  const auto q = QuadraticObjective::scalar_half_square(1);
  const Vec64 theta{1.0};
  CHECK(std::abs(perturbed_loss(q, theta, 0.1) - 0.605) <= 1e-12);
  CHECK(std::abs(surrogate_gap(q, theta, 0.1) - 0.105) <= 1e-12);
  CHECK(perturbed_loss(q, theta, 0.0) == 0.5);
  CHECK(surrogate_gap(q, theta, 0.0) == 0.0);
}

TEST_CASE("surrogate gap is zero at rho = 0 and grows with rho on a convex quadratic") {
  const QuadraticObjective q({{1.0, 5.0, 0.2}}, {{0.5, -1.0, 2.0}});
  Prng prng(1);
  for (int rep = 0; rep < 30; ++rep) {
    const Vec64 theta = gaussian(prng, 3);
    CHECK(surrogate_gap(q, theta, 0.0) == 0.0);
    double prev = 0.0;
    for (double rho : {0.01, 0.05, 0.1, 0.2, 0.4, 1.0}) {
      const double gap = surrogate_gap(q, theta, rho);
      CHECK(perturbed_loss(q, theta, rho) >= q.domain_loss(theta, 0));
      CHECK(gap >= prev);
      prev = gap;
    }
  }
}

TEST_CASE("MLP perturbed loss at rho = 0 is the loss") {
  const MlpSpec spec{{2, 8, 2}, Activation::relu};
  Prng prng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const Vec64 theta = random_theta(spec, prng);
    const Batch b = random_batch(24, 2, 3, prng);
    CHECK(perturbed_loss(spec, theta, b, 0.0) == loss(spec, theta, b));
    CHECK(surrogate_gap(spec, theta, b, 0.0) == 0.0);
  }
}

TEST_CASE("alignment inner products without perturbation") {
  const MlpSpec spec{{2, 6, 2}, Activation::tanh};
  const SourceSet s = equal_size_source(3, 40, 11);
  Prng prng(3);
  const Vec64 theta = random_theta(spec, prng);
  const Matrix m = alignment_inner_products(spec, theta, s, 1, 0.0, 0.0);
  for (std::size_t a = 0; a < 3; ++a) {
    CHECK(m(a, a) > 0.0);
    for (std::size_t b = 0; b < 3; ++b) CHECK(std::abs(m(a, b) - m(b, a)) <= 1e-10);
  }
  CHECK_THROWS_AS(alignment_inner_products(spec, theta, s, 3, 0.1, 0.0), ContractError);
}

TEST_CASE("alignment inner products with one domain") {
  const MlpSpec spec{{2, 6, 2}, Activation::tanh};
  const SourceSet s = equal_size_source(1, 50, 21);
  Prng prng(4);
  const Vec64 theta = random_theta(spec, prng);
  const Matrix m = alignment_inner_products(spec, theta, s, 0, 0.1, 0.01);
  REQUIRE(m.rows == 1);
  const Batch& b = s.domains[0].data;
  const Vec64 g = loss_and_grad(spec, theta, b).grad;
  const Vec64 eps = scaled(0.1 / l2_norm(g), g);
  Vec64 adv = theta;
  for (std::size_t j = 0; j < adv.size(); ++j) adv[j] += eps[j] - 0.01 * g[j];
  const Vec64 gp = loss_and_grad(spec, adv, b).grad;
  CHECK(m(0, 0) == doctest::Approx(l2_norm(gp) * l2_norm(g) * cosine(gp, g)).epsilon(1e-12));
}

TEST_CASE("entries sum to the whole-set inner product") {
  // With equal domain sizes the summed domain loss is k times the mean loss
  // on the concatenated set, so the whole-set gradients come from one call.
  const MlpSpec spec{{2, 8, 2}, Activation::tanh};
  Prng prng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const SourceSet s = equal_size_source(3, 30, 100 + 10 * rep);
    const Batch all = s.merged();
    const Vec64 theta = random_theta(spec, prng);
    const std::size_t i = rep % 3;
    const double rho = 0.1, gamma = 0.05;

    const Vec64 g = scaled(3.0, loss_and_grad(spec, theta, all).grad);
    const Vec64 gi = loss_and_grad(spec, theta, s.domains[i].data).grad;
    Vec64 adv = theta;
    for (std::size_t j = 0; j < adv.size(); ++j) adv[j] += rho * gi[j] / l2_norm(gi) - gamma * g[j];
    const Vec64 gp = scaled(3.0, loss_and_grad(spec, adv, all).grad);
    const double whole = testing::compensated_dot(gp, g);

    const Matrix m = alignment_inner_products(spec, theta, s, i, rho, gamma);
    double total = 0.0;
    for (double v : m.data) total += v;
    CHECK(std::abs(total - whole) <= 1e-9 * std::abs(whole));
  }
}

TEST_CASE("taylor residual shrinks quadratically in gamma") {
  const MlpSpec spec{{2, 8, 2}, Activation::tanh};
  Prng prng(6);
  for (int rep = 0; rep < 10; ++rep) {
    const Vec64 theta = random_theta(spec, prng);
    const MlpObjective obj(spec, random_batch(30, 2, 3, prng));
    const double r1 = taylor_alignment_residual(obj, theta, 0, 0.1, 1e-2);
    const double r2 = taylor_alignment_residual(obj, theta, 0, 0.1, 5e-3);
    const double r3 = taylor_alignment_residual(obj, theta, 0, 0.1, 2.5e-3);
    CHECK(r1 / r2 >= 3.0);
    CHECK(r2 / r3 >= 3.0);
  }
}

TEST_CASE("block-normalized directions") {
  const MlpSpec spec{{2, 5, 3, 2}, Activation::relu};
  Prng prng(7);
  Vec64 theta = random_theta(spec, prng);
  const auto blocks = param_blocks(spec);
  CHECK(blocks.size() == 6);
  for (std::size_t j = 0; j < blocks[1].size; ++j) theta[blocks[1].offset + j] = 0.0;
  const Vec64 d = block_normalized_direction(theta, blocks, prng);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const ConstSpan tb = ConstSpan(theta).subspan(blocks[b].offset, blocks[b].size);
    const ConstSpan db = ConstSpan(d).subspan(blocks[b].offset, blocks[b].size);
    CHECK(l2_norm(db) == doctest::Approx(l2_norm(tb)).epsilon(1e-12));
  }
}

TEST_CASE("landscape slices") {
  const MlpSpec spec{{2, 6, 2}, Activation::relu};
  Prng prng(8);
  const Vec64 theta = random_theta(spec, prng);
  const Batch b = random_batch(40, 2, 1, prng);

  Prng p1(99), p2(99);
  const LandscapeGrid g1 = landscape_slice(spec, theta, b, 1, 1.0, 11, p1);
  CHECK(g1.losses.size() == 11);
  CHECK(g1.offsets[5][0] == 0.0);
  CHECK(g1.losses[5] == loss(spec, theta, b));
  CHECK(g1.center_loss == loss(spec, theta, b));
  CHECK(g1.offsets.front()[0] == -1.0);
  CHECK(g1.offsets.back()[0] == 1.0);
  const LandscapeGrid g1b = landscape_slice(spec, theta, b, 1, 1.0, 11, p2);
  CHECK(g1b.losses == g1.losses);

  Prng p3(5);
  const LandscapeGrid g2 = landscape_slice(spec, theta, b, 2, 0.5, 7, p3);
  CHECK(g2.losses.size() == 49);
  CHECK(g2.losses[24] == loss(spec, theta, b));

  Prng p4(5);
  CHECK_THROWS_AS(landscape_slice(spec, theta, b, 1, 1.0, 10, p4), ContractError);
  CHECK_THROWS_AS(landscape_slice(spec, theta, b, 3, 1.0, 11, p4), ContractError);
  CHECK_THROWS_AS(landscape_slice(spec, theta, b, 1, 0.0, 11, p4), ContractError);

  const auto dir = testing::scratch_dir("landscape");
  write_landscape_csv(g2, dir / "l.csv");
  CHECK(read_file(dir / "l.csv").rfind("s,u,loss\n", 0) == 0);
  write_landscape_csv(g1, dir / "l1.csv");
  CHECK(read_file(dir / "l1.csv").rfind("s,loss\n", 0) == 0);
}

TEST_CASE("quadratic loss gives a parabolic slice") {
  const Vec64 a{1.0, 3.0, 0.5, 2.0, 7.0};
  LossFn fn = [&](ConstSpan p) {
    double l = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) l += 0.5 * a[j] * p[j] * p[j];
    return l;
  };
  Prng prng(9);
  const Vec64 theta = gaussian(prng, 5);
  const std::vector<ParamBlock> blocks{{0, 2}, {2, 3}};
  const LandscapeGrid g = landscape_slice(fn, theta, blocks, 1, 1.0, 21, prng);
  Vec64 second;
  for (std::size_t j = 1; j + 1 < g.losses.size(); ++j) {
    second.push_back(g.losses[j - 1] - 2.0 * g.losses[j] + g.losses[j + 1]);
  }
  for (double v : second) CHECK(std::abs(v - second.front()) <= 1e-8);
}

TEST_CASE("convergence traces") {
  SUBCASE("zero gradients") {
    std::vector<StepDiagnostics> s(100);
    for (std::size_t t = 0; t < s.size(); ++t) {
      s[t].t = t + 1;
      s[t].adv_grad_norms = {0.0, 0.0};
    }
    const auto tr = convergence_trace(s, 10);
    CHECK(tr.t.size() == 10);
    for (double v : tr.grad_sq) CHECK(v == 0.0);
    for (double v : tr.adv_grad_sq) CHECK(v == 0.0);
    CHECK(tr.exceed_fraction_grad == 0.0);
    CHECK(tr.exceed_fraction_adv == 0.0);
  }
  SUBCASE("decaying stream") {
    std::vector<StepDiagnostics> s(1000);
    for (std::size_t t = 0; t < s.size(); ++t) {
      s[t].t = t + 1;
      s[t].grad_norm = std::pow(static_cast<double>(t + 1), -0.25);  // squared: 1/sqrt(t)
      s[t].adv_grad_norms = {s[t].grad_norm};
    }
    const auto tr = convergence_trace(s, 50);
    for (std::size_t w = 1; w < tr.grad_sq.size(); ++w) {
      CHECK(tr.grad_sq[w] < tr.grad_sq[w - 1]);
      CHECK(tr.adv_grad_sq[w] < tr.adv_grad_sq[w - 1]);
    }
    CHECK(tr.last_decile_grad < tr.first_decile_grad);
    CHECK(tr.fitted_c_grad == doctest::Approx(tr.fitted_c_adv));
    const auto dir = testing::scratch_dir("convergence");
    write_convergence_csv(tr, dir / "c.csv");
    CHECK(read_file(dir / "c.csv").rfind("t,grad_sq_mean,adv_grad_sq_mean,bound\n", 0) == 0);
  }
  CHECK_THROWS_AS(convergence_trace(std::vector<StepDiagnostics>{}, 10), ContractError);
  CHECK_THROWS_AS(convergence_trace(std::vector<StepDiagnostics>(3), 0), ContractError);
}
