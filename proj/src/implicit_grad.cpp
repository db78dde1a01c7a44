#include "scopf/implicit_grad.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/SparseLU>

#include "scopf/errors.hpp"

namespace scopf {

namespace {

void require_converged(const ThirdStageSolution& sol) {
  if (!sol.converged || !sol.kkt_factorization || !sol.problem)
    throw ContractViolation("third-stage solution is not converged or has no factorization");
}

std::vector<StencilEntry> compress(const std::map<int, double>& acc) {
  std::vector<StencilEntry> out;
  out.reserve(acc.size());
  for (const auto& [row, v] : acc) out.push_back({row, v});
  return out;
}

}  // namespace

int SparseDerivativeStencil::max_nonzeros() const {
  std::size_t m = 0;
  for (const auto& d : per_device) m = std::max(m, d.size());
  return static_cast<int>(m);
}

SparseDerivativeStencil derivative_stencil(const PowerSystem& sys, const ThirdStageSolution& sol) {
  require_converged(sol);
  const auto& prob = *sol.problem;
  const auto& lay = prob.layout;
  const int n = sys.n_bus();
  const int nu = prob.n_primal();
  const int m = prob.n_eq();
  const KktPoint pt = sol.point(sys);
  const Vector vm = pt.u.segment(lay.vm0, n);
  Vector va = Vector::Zero(n);
  for (int i = 0; i < n; ++i)
    if (lay.va(i) >= 0) va[i] = pt.u[lay.va(i)];

  std::vector<std::map<int, double>> acc(sys.n_outage());
  for (int j = 0; j < sys.n_outage(); ++j) {
    const auto& dev = sys.outage_devices[j];
    if (dev.kind != DeviceKind::branch) continue;
    // The branch enters F only through (1 - y_j) * its flows.
    const auto bf = prob.net.branch_flows(dev.index, vm, va);
    for (int v = 0; v < 4; ++v) {
      const int var = lay.coord(bf.coord(v, n));
      if (var < 0) continue;
      double d = 0.0;
      for (int o = 0; o < 4; ++o) d += bf.grad[o][v] * pt.lambda[bf.row(o, n)];
      acc[j][var] -= d;
    }
    for (int o = 0; o < 4; ++o) acc[j][nu + bf.row(o, n)] -= bf.value[o];
  }
  for (int k = 0; k < prob.n_ineq(); ++k) {
    const auto& b = prob.bounds[k];
    if (b.y_slot < 0 || b.dvalue_dy == 0.0) continue;
    acc[b.y_slot][nu + m + k] += pt.mu[k] * b.sign * b.dvalue_dy;
  }

  SparseDerivativeStencil st;
  st.per_device.reserve(acc.size());
  for (const auto& a : acc) st.per_device.push_back(compress(a));
  return st;
}

Vector loss_sensitivity(const PowerSystem& sys, const ThirdStageSolution& sol) {
  require_converged(sol);
  const auto& prob = *sol.problem;
  const auto& lay = prob.layout;
  Vector v = Vector::Zero(prob.dim());
  const Vector pg = sol.pg(sys);
  for (int g = 0; g < sys.n_gen(); ++g)
    v[lay.pg(g)] = prob.cost_scale * sys.generators[g].cost.slope(pg[g]);
  for (int r = 0; r < prob.n_eq(); ++r) v[lay.s(r)] = prob.slack_weight * sol.s[r];
  return v;
}

Vector djdy_vjp(const PowerSystem& sys, const Dispatch& x, const AttackVector& y,
                const ThirdStageSolution& sol, const Vector& v) {
  check_solution_matches(sol, x, y);
  if (v.size() != sol.problem->dim()) throw DimensionError("VJP vector has wrong length");
  const auto st = derivative_stencil(sys, sol);
  Vector out = Vector::Zero(sys.n_outage());
  for (int j = 0; j < sys.n_outage(); ++j)
    for (const auto& e : st.per_device[j]) out[j] += v[e.row] * e.value;
  return out;
}

AttackGradient attack_gradient(const PowerSystem& sys, const Dispatch& x, const AttackVector& y,
                               const ThirdStageSolution& sol) {
  check_solution_matches(sol, x, y);
  require_converged(sol);
  const Vector q = sol.kkt_factorization->solve_transpose(loss_sensitivity(sys, sol));
  AttackGradient g;
  g.explicit_term = Vector::Zero(sys.n_outage());
  g.implicit_term = djdy_vjp(sys, x, y, sol, q);
  g.total = g.explicit_term + g.implicit_term;
  if (!g.total.allFinite()) {
    std::string bad;
    for (int j = 0; j < g.total.size(); ++j)
      if (!std::isfinite(g.total[j])) bad += (bad.empty() ? "" : ", ") + sys.device_label(j);
    throw NumericalError("attack gradient is not finite for: " + bad);
  }
  return g;
}

FiniteDiffGradient finite_difference(const std::function<double(const Vector&)>& f,
                                     const Vector& at, double h, double lo, double hi) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  FiniteDiffGradient out;
  out.grad.resize(at.size());
  out.one_sided.assign(at.size(), false);
  const double f0_unset = std::nan("");
  double f0 = f0_unset;
  for (int j = 0; j < at.size(); ++j) {
    Vector p = at;
    Vector q = at;
    const bool can_up = at[j] + h <= hi;
    const bool can_down = at[j] - h >= lo;
    if (can_up && can_down) {
      p[j] += h;
      q[j] -= h;
      out.grad[j] = (f(p) - f(q)) / (2.0 * h);
      continue;
    }
    out.one_sided[j] = true;
    if (std::isnan(f0)) f0 = f(at);
    if (can_up) {
      p[j] += h;
      out.grad[j] = (f(p) - f0) / h;
    } else {
      q[j] -= h;
      out.grad[j] = (f0 - f(q)) / h;
    }
  }
  return out;
}

FiniteDiffGradient finite_diff_gradient(const PowerSystem& sys, const Dispatch& x,
                                        const AttackVector& y, double h, const SolverConfig& cfg) {
  int coord = -1;
  auto loss_at = [&](const Vector& yy) {
    for (int j = 0; j < yy.size(); ++j)
      if (yy[j] != y.y[j]) coord = j;
    // The budget does not enter the third stage; only the box matters here.
    const AttackVector probe{yy, std::max(1, sys.n_outage())};
    return solve_third_stage(sys, x, probe, cfg).attack_loss(sys);
  };
  try {
    return finite_difference(loss_at, y.y, h, 0.0, 1.0);
  } catch (const std::exception& e) {
    throw NumericalError("finite difference at coordinate " + std::to_string(coord) + ": " +
                         e.what());
  }
}

double base_cost(const PowerSystem& sys, const Dispatch& x, const SolverConfig& cfg) {
  PowerFlowOptions opts;
  opts.tol = cfg.pf_tol;
  opts.max_iter = cfg.max_pf_iter;
  const auto pf = solve_power_flow(sys, x, nullptr, opts);
  if (!pf.converged) throw ConvergenceError("base power flow did not converge", {pf.residual});
  return generation_cost(sys, generator_outputs(sys, x, pf.state), cfg.cost_scale);
}

Vector outer_gradient(const PowerSystem& sys, const Dispatch& x, const AttackVector& y,
                      const ThirdStageSolution& sol, const SolverConfig& cfg) {
  check_solution_matches(sol, x, y);
  require_converged(sol);
  const int ng = sys.n_gen();
  const int nx = 2 * ng - 1;
  Vector grad = Vector::Zero(nx);

  // Contingency part: the dispatch enters F only through the bounds.
  const auto& prob = *sol.problem;
  const int nu = prob.n_primal();
  const int m = prob.n_eq();
  const Vector q = sol.kkt_factorization->solve_transpose(loss_sensitivity(sys, sol));
  for (int k = 0; k < prob.n_ineq(); ++k) {
    const auto& b = prob.bounds[k];
    if (b.x_coord < 0) continue;
    grad[b.x_coord] += q[nu + m + k] * sol.mu[k] * b.sign * b.dvalue_dx;
  }

  // Base part: direct cost of the set points plus the slack generator's
  // response through the base power flow.
  PowerFlowOptions opts;
  opts.tol = cfg.pf_tol;
  opts.max_iter = cfg.max_pf_iter;
  const auto pf = solve_power_flow(sys, x, nullptr, opts);
  if (!pf.converged) throw ConvergenceError("base power flow did not converge", {pf.residual});
  for (int g = 0; g < ng; ++g) {
    const int xi = Dispatch::p_index(sys, g);
    if (xi >= 0) grad[xi] += cfg.cost_scale * sys.generators[g].cost.slope(x.p[xi]);
  }
  const int slack_gen = sys.slack_generator();
  const auto jac = mismatch_jacobian(sys, x, pf.state);
  Eigen::SparseLU<SparseMatrix> lu(jac);
  if (lu.info() != Eigen::Success) throw SingularMatrixError("base power-flow Jacobian is singular");
  Vector df_dw = Vector::Zero(jac.cols());
  df_dw[jac.cols() - 1] =
      cfg.cost_scale * sys.generators[slack_gen].cost.slope(pf.state.p_slack);  // p_slack is last
  const Vector adj = lu.transpose().solve(df_dw);

  // dG/dx: +1 on the P row for real power set points; minus the flow
  // sensitivity to the generator-bus magnitude for voltage set points.
  const int n = sys.n_bus();
  const NetworkEquations net(sys, std::vector<double>(sys.branches.size(), 1.0));
  Vector vm = pf.state.vm;
  std::vector<Triplet> fj;
  net.append_jacobian(vm, pf.state.va, -1.0, fj);
  std::vector<int> gen_at = sys.generator_at_bus();
  for (int g = 0; g < ng; ++g) {
    const int xi = Dispatch::p_index(sys, g);
    if (xi >= 0) grad[xi] -= adj[sys.generators[g].bus];
  }
  for (const auto& t : fj) {
    if (t.col() >= n) continue;
    const int g = gen_at[t.col()];
    if (g < 0) continue;
    grad[(ng - 1) + g] -= adj[t.row()] * t.value();
  }
  if (!grad.allFinite()) throw NumericalError("dispatch gradient is not finite");
  return grad;
}

}  // namespace scopf
