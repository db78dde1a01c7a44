#include "scopf/defense.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "scopf/errors.hpp"

namespace scopf {

Vector contingency_coupling(const PowerSystem& sys, const ThirdStageSolution& sol) {
  if (!sol.problem) throw ContractViolation("third-stage solution carries no problem");
  Vector c = Vector::Zero(2 * sys.n_gen() - 1);
  const auto& bounds = sol.problem->bounds;
  for (std::size_t k = 0; k < bounds.size(); ++k) {
    const auto& b = bounds[k];
    if (b.x_coord >= 0) c[b.x_coord] -= sol.mu[static_cast<Eigen::Index>(k)] * b.sign * b.dvalue_dx;
  }
  return c;
}

std::optional<Dispatch> damped_dispatch(const PowerSystem& sys, const Dispatch& x,
                                        const Dispatch& x_raw, double eta, double tol,
                                        double* residual) {
  Dispatch cand{x.p + eta * (x_raw.p - x.p), x.v + eta * (x_raw.v - x.v)};
  PowerFlowOptions opts;
  opts.tol = std::min(tol, 1e-8);
  try {
    const auto pf = solve_power_flow(sys, cand, nullptr, opts);
    if (residual != nullptr) *residual = pf.residual;
    if (pf.converged && pf.residual <= tol) return cand;
  } catch (const SingularMatrixError&) {
    if (residual != nullptr) *residual = std::numeric_limits<double>::infinity();
  }
  return std::nullopt;
}

DefenseStepResult defense_step(const PowerSystem& sys, const Dispatch& x,
                               const AttackVector& y_star, const ThirdStageSolution& sol_star,
                               const DefenseConfig& cfg, const SolverConfig& solver,
                               const BaseOpfResult* warm_start) {
  check_solution_matches(sol_star, x, y_star);
  if (!sol_star.converged) throw ContractViolation("defense step needs a converged contingency solve");

  DefenseStepResult res;
  res.x = x;
  res.coupling = cfg.zero_coupling ? Vector::Zero(2 * sys.n_gen() - 1)
                                   : contingency_coupling(sys, sol_star);
  res.coupling_norm = res.coupling.lpNorm<Eigen::Infinity>();

  SolverConfig base_cfg = solver;
  base_cfg.kkt_tol = cfg.base_tol;
  BaseOpfOptions opts;
  opts.dispatch_linear = res.coupling;
  opts.warm_start = warm_start;
  try {
    res.base = solve_base_opf(sys, base_cfg, opts);
  } catch (const InfeasibleError&) {
    res.stalled = true;
    return res;
  } catch (const SingularMatrixError&) {
    res.stalled = true;
    return res;
  }
  res.x_raw = res.base.x;
  res.base_kkt_residual = res.base.kkt_residual;
  res.lambda_base = res.base.point.lambda;
  res.mu_base = res.base.point.mu;

  double eta = cfg.damping;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    double residual = 0.0;
    if (auto cand = damped_dispatch(sys, x, res.x_raw, eta, cfg.base_tol, &residual)) {
      res.x = *cand;
      res.damping = eta;
      res.base_pf_residual = residual;
      res.retries = attempt;
      return res;
    }
    eta *= 0.5;
  }
  res.stalled = true;
  res.retries = cfg.max_retries;
  res.damping = 0.0;
  return res;
}

Dispatch project_dispatch(const PowerSystem& sys, const Dispatch& x) {
  x.check(sys);
  Dispatch out = x;
  for (int g = 0; g < sys.n_gen(); ++g) {
    const auto& gen = sys.generators[g];
    const int i = Dispatch::p_index(sys, g);
    if (i >= 0) out.p[i] = std::clamp(out.p[i], gen.p_min, gen.p_max);
    const auto& bus = sys.buses[gen.bus];
    out.v[g] = std::clamp(out.v[g], bus.v_min, bus.v_max);
  }
  return out;
}

Dispatch outer_gradient_step(const PowerSystem& sys, const Dispatch& x, const AttackVector& y_star,
                             const ThirdStageSolution& sol_star, double beta,
                             const SolverConfig& solver) {
  if (beta < 0.0) throw std::invalid_argument("outer step size must be nonnegative");
  if (beta == 0.0) return x;
  const Vector grad = outer_gradient(sys, x, y_star, sol_star, solver);
  return project_dispatch(sys, Dispatch::from_flat(sys, x.flat() - beta * grad));
}

double coupled_kkt_residual(const PowerSystem& sys, const Dispatch& x, const AttackVector& y,
                            const ThirdStageSolution& sol_cont, const KktPoint& base_point,
                            const SolverConfig& solver) {
  const FlowProblem base = build_base_opf_problem(sys, solver, contingency_coupling(sys, sol_cont));
  const FlowProblem cont = build_third_stage_problem(sys, x, y, solver);
  if (cont.n_ineq() != sol_cont.problem->n_ineq())
    throw ContractViolation("contingency bound structure changed with x");
  const double rb = kkt_residual(base, base_point).lpNorm<Eigen::Infinity>();
  const double rc = kkt_residual(cont, sol_cont.point(sys)).lpNorm<Eigen::Infinity>();
  return std::max(rb, rc);
}

}  // namespace scopf
