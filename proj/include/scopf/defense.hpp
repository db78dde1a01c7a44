#pragma once

#include <optional>

#include "scopf/implicit_grad.hpp"
#include "scopf/powerflow.hpp"

namespace scopf {

struct DefenseConfig {
  double base_tol = 1e-6;  // KKT tolerance of the base solve and power-flow check at x'
  double damping = 1.0;    // eta in x' = x + eta (x_raw - x)
  int max_retries = 3;     // halvings of eta when x' has no base power flow
  bool zero_coupling = false;  // decoupled limit, for diagnostics
};

struct DefenseStepResult {
  Dispatch x;               // accepted x' (the input x when stalled)
  Dispatch x_raw;           // base-side solution before damping
  double damping = 1.0;     // eta actually used
  double base_kkt_residual = 0.0;
  double base_pf_residual = 0.0;
  Vector lambda_base;
  Vector mu_base;
  Vector coupling;          // d/dx of the contingency Lagrangian at the frozen solution
  double coupling_norm = 0.0;
  bool stalled = false;
  int retries = 0;
  BaseOpfResult base;       // full base-side solve, reusable as a warm start
};

/// Sum over contingency bounds of mu_k dh_k/dx, length 2 n_gen - 1. The flow
/// equations of the contingency do not involve x, so this is the whole
/// coupling of the contingency block into the base block.
Vector contingency_coupling(const PowerSystem& sys, const ThirdStageSolution& sol);

/// One ordered Gauss-Seidel pass: the contingency block is taken as solved
/// (sol_star), the base block is solved by the interior-point core with the
/// coupling added as a linear term, and x moves toward the result.
DefenseStepResult defense_step(const PowerSystem& sys, const Dispatch& x,
                               const AttackVector& y_star, const ThirdStageSolution& sol_star,
                               const DefenseConfig& cfg = {}, const SolverConfig& solver = {},
                               const BaseOpfResult* warm_start = nullptr);

/// x + eta (x_raw - x) when its base power flow converges to tol, else nullopt.
/// The residual of the check is written to *residual when non-null.
std::optional<Dispatch> damped_dispatch(const PowerSystem& sys, const Dispatch& x,
                                        const Dispatch& x_raw, double eta, double tol,
                                        double* residual = nullptr);

/// Clips every dispatch coordinate to its device limits.
Dispatch project_dispatch(const PowerSystem& sys, const Dispatch& x);

/// x' = clip(x - beta * grad_x), grad_x from outer_gradient. Does not check
/// base power-flow feasibility.
Dispatch outer_gradient_step(const PowerSystem& sys, const Dispatch& x, const AttackVector& y_star,
                             const ThirdStageSolution& sol_star, double beta,
                             const SolverConfig& solver = {});

/// Infinity norm of both KKT groups of the joint problem stacked: the base
/// group (base-side point with the coupling term of sol_cont) and the
/// contingency group at (x, y).
double coupled_kkt_residual(const PowerSystem& sys, const Dispatch& x, const AttackVector& y,
                            const ThirdStageSolution& sol_cont, const KktPoint& base_point,
                            const SolverConfig& solver = {});

}  // namespace scopf
