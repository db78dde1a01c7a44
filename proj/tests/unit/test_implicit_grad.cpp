#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "scopf/errors.hpp"
#include "scopf/implicit_grad.hpp"
#include "scopf/instrumentation.hpp"

using namespace scopf;
using scopf::test::case14;
using scopf::test::case14_opf;

namespace {

// Interior attack on the 14-bus case: every coordinate away from 0 and 1.
AttackVector interior_attack(const PowerSystem& sys) {
  AttackVector y = AttackVector::zeros(sys.n_outage(), 2);
  for (int j = 0; j < sys.n_outage(); ++j) y.y[j] = 0.01 + 0.002 * j;
  y.y[scopf::test::branch_slot(sys, 2, 4)] = 0.3;
  y.y[scopf::test::branch_slot(sys, 1, 5)] = 0.25;
  return y;
}

}  // namespace

TEST_CASE("gradient agrees with central differences at an interior attack") {
  const auto& sys = case14();
  const auto& opf = case14_opf();
  const auto y = interior_attack(sys);
  REQUIRE(y.is_valid());
  // The stored factorization belongs to the last Newton iterate, so the
  // gradient is only as accurate as that iterate: solve tightly on both sides.
  SolverConfig tight;
  tight.kkt_tol = 1e-8;
  const auto sol = solve_third_stage(sys, opf.x, y, tight);
  const auto g = attack_gradient(sys, opf.x, y, sol);
  const auto fd = finite_diff_gradient(sys, opf.x, y, 1e-5, tight);
  CHECK(g.explicit_term.lpNorm<Eigen::Infinity>() == 0.0);
  for (int j = 0; j < sys.n_outage(); ++j) {
    CHECK_FALSE(fd.one_sided[j]);
    if (std::abs(fd.grad[j]) <= 1e-6) continue;
    INFO(sys.device_label(j));
    CHECK(std::abs(g.total[j] - fd.grad[j]) <= 1e-3 * std::abs(fd.grad[j]));
  }
}

TEST_CASE("an idle generator has no influence on the loss") {
  // The reference OPF leaves the generator at bus 6 at zero real output, and
  // its reactive range is not binding.
  const auto& sys = case14();
  const auto& opf = case14_opf();
  const auto y = interior_attack(sys);
  const auto sol = solve_third_stage(sys, opf.x, y);
  const auto g = attack_gradient(sys, opf.x, y, sol);
  const int slot = scopf::test::generator_slot(sys, 6);
  CHECK(std::abs(g.total[slot]) <= 1e-6);
  CHECK(g.total.lpNorm<Eigen::Infinity>() > 1e-3);
}

TEST_CASE("gradient is bitwise reproducible") {
  const auto& sys = case14();
  const auto& opf = case14_opf();
  const auto y = interior_attack(sys);
  const auto a = attack_gradient(sys, opf.x, y, solve_third_stage(sys, opf.x, y));
  const auto b = attack_gradient(sys, opf.x, y, solve_third_stage(sys, opf.x, y));
  CHECK(a.total == b.total);
}

TEST_CASE("gradient uses one transpose solve and no new factorization") {
  const auto& sys = case14();
  const auto& opf = case14_opf();
  const auto y = interior_attack(sys);
  const auto sol = solve_third_stage(sys, opf.x, y);
  const SolverCounters before = counters();
  (void)attack_gradient(sys, opf.x, y, sol);
  const SolverCounters d = counters() - before;
  CHECK(d.kkt_transpose_solves == 1);
  CHECK(d.kkt_factorizations == 0);
  CHECK(d.kkt_solves == 0);
  CHECK(d.third_stage_solves == 0);
}

TEST_CASE("vector-Jacobian product is linear and local") {
  const auto& sys = case14();
  const auto& opf = case14_opf();
  const auto y = interior_attack(sys);
  const auto sol = solve_third_stage(sys, opf.x, y);
  const int dim = sol.problem->dim();
  CHECK(djdy_vjp(sys, opf.x, y, sol, Vector::Zero(dim)).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK_THROWS_AS(djdy_vjp(sys, opf.x, y, sol, Vector::Zero(dim + 1)), DimensionError);

  // A unit weight on the real-power balance of bus 14 reaches only devices
  // incident to bus 14, never branch 1-2.
  Vector v = Vector::Zero(dim);
  v[sol.problem->n_primal() + 13] = 1.0;
  const Vector out = djdy_vjp(sys, opf.x, y, sol, v);
  CHECK(out[scopf::test::branch_slot(sys, 1, 2)] == 0.0);
  CHECK(out[scopf::test::branch_slot(sys, 9, 14)] != 0.0);
  CHECK(out[scopf::test::branch_slot(sys, 13, 14)] != 0.0);
}

TEST_CASE("stencil entries equal the derivative of the KKT residual in y") {
  using namespace scopf::test;
  // Two buses, a lossy line with charging, and a second generator at the
  // load bus so both device kinds appear.
  GenSpec g0, g1;
  g1.bus = 2;
  g1.pmax = 40.0;
  g1.qmax = 20.0;
  g1.qmin = -20.0;
  g1.c1 = 30.0;
  const auto sys = parse_case(
      case_text({{3}, {2, 60.0, 15.0}}, {g0, g1}, {{1, 2, 0.02, 0.1, 0.04}}));
  const auto x = nominal_dispatch(sys);
  AttackVector y = AttackVector::zeros(sys.n_outage(), 1);
  y.y[0] = 0.3;
  y.y[1] = 0.4;
  SolverConfig cfg;
  const auto sol = solve_third_stage(sys, x, y, cfg);
  REQUIRE(sol.converged);
  const KktPoint pt = sol.point(sys);
  const auto st = derivative_stencil(sys, sol);
  REQUIRE(static_cast<int>(st.per_device.size()) == sys.n_outage());

  const double h = 1e-6;
  for (int j = 0; j < sys.n_outage(); ++j) {
    AttackVector yp = y, ym = y;
    yp.y[j] += h;
    ym.y[j] -= h;
    const Vector fp = kkt_residual(build_third_stage_problem(sys, x, yp, cfg), pt);
    const Vector fm = kkt_residual(build_third_stage_problem(sys, x, ym, cfg), pt);
    const Vector r_fd = -(fp - fm) / (2.0 * h);
    Vector r = Vector::Zero(r_fd.size());
    for (const auto& e : st.per_device[j]) r[e.row] = e.value;
    INFO(sys.device_label(j));
    CHECK(r.lpNorm<Eigen::Infinity>() > 0.0);
    CHECK((r - r_fd).lpNorm<Eigen::Infinity>() <= 1e-5 * r_fd.lpNorm<Eigen::Infinity>());
  }
}

TEST_CASE("stencil stays within 20 nonzeros per device") {
  const auto& sys = case14();
  const auto& opf = case14_opf();
  const auto y = interior_attack(sys);
  const auto st = derivative_stencil(sys, solve_third_stage(sys, opf.x, y));
  CHECK(st.max_nonzeros() <= SparseDerivativeStencil::kMaxNonzeros);
  CHECK(st.max_nonzeros() > 0);
}

TEST_CASE("finite differences on known functions") {
  auto quad = [](const Vector& v) { return 3.0 * v[0] * v[0] + 2.0 * v[1]; };
  Vector at(2);
  at << 0.5, 0.5;
  auto fd = finite_difference(quad, at, 1e-4, 0.0, 1.0);
  CHECK(fd.grad[0] == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(fd.grad[1] == doctest::Approx(2.0).epsilon(1e-9));

  // Central error of a cubic is h^2: halving h quarters it.
  auto cubic = [](const Vector& v) { return v[0] * v[0] * v[0]; };
  Vector c(1);
  c << 0.5;
  const double e1 = std::abs(finite_difference(cubic, c, 1e-2, 0.0, 1.0).grad[0] - 0.75);
  const double e2 = std::abs(finite_difference(cubic, c, 5e-3, 0.0, 1.0).grad[0] - 0.75);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(1e-3));

  // At the box edge the difference turns one-sided.
  Vector edge(2);
  edge << 1.0, 0.0;
  fd = finite_difference(quad, edge, 1e-6, 0.0, 1.0);
  CHECK(fd.one_sided[0]);
  CHECK(fd.one_sided[1]);
  CHECK(fd.grad[0] == doctest::Approx(6.0).epsilon(1e-5));
  CHECK_THROWS_AS(finite_difference(quad, at, 0.0, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("gradient refuses a solution computed for another attack") {
  const auto& sys = case14();
  const auto& opf = case14_opf();
  const auto y = interior_attack(sys);
  const auto sol = solve_third_stage(sys, opf.x, y);
  auto other = y;
  other.y[0] += 0.01;
  CHECK_THROWS_AS(attack_gradient(sys, opf.x, other, sol), ContractViolation);
}
