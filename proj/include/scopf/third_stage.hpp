#pragma once

#include <memory>
#include <string>
#include <vector>

#include "scopf/config.hpp"
#include "scopf/interior_point.hpp"
#include "scopf/powerflow.hpp"

namespace scopf {

/// Converged contingency redispatch for one (x, y).
///
/// The real output of the slack generator lives in w_cont.p_slack and the
/// voltage magnitude at generator buses in z.v; w_cont.vm holds the others.
struct ThirdStageSolution {
  Dispatch z;
  Vector s;               // 2 n_bus: P rows then Q rows
  NetworkState w_cont;
  Vector lambda;          // 2 n_bus
  Vector mu;              // one per bound of `problem`
  double barrier = 0.0;
  std::shared_ptr<const KktFactorization> kkt_factorization;
  Vector rhs_b;           // right-hand side of the factored Newton system
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;  // KKT infinity norm reported by the solver
  std::vector<double> residual_history;
  std::vector<std::string> diagnostics;

  // Inputs the solution belongs to.
  Vector x_flat;
  Vector y;
  std::shared_ptr<const FlowProblem> problem;

  /// Real output of every generator.
  [[nodiscard]] Vector pg(const PowerSystem& sys) const;
  /// Primal-dual point assembled from the public fields.
  [[nodiscard]] KktPoint point(const PowerSystem& sys) const;
  /// Contingency cost (scaled) and slack penalty.
  [[nodiscard]] double f_cont(const PowerSystem& sys) const;
  [[nodiscard]] double slack_penalty() const;
  /// f_cont + slack penalty, the quantity the attacker maximizes.
  [[nodiscard]] double attack_loss(const PowerSystem& sys) const {
    return f_cont(sys) + slack_penalty();
  }
};

/// Builds the contingency problem: flows scaled by y, slack variables on every
/// balance row, generator limits scaled by y, and real power of non-slack
/// generators held within the ramp window around x. Diagnostics about
/// widened bounds are appended to `diagnostics` when non-null.
FlowProblem build_third_stage_problem(const PowerSystem& sys, const Dispatch& x,
                                      const AttackVector& y, const SolverConfig& cfg,
                                      std::vector<std::string>* diagnostics = nullptr);

/// Solves the contingency redispatch by the interior-point core. Throws
/// ConvergenceError (with the residual history) or SingularMatrixError.
ThirdStageSolution solve_third_stage(const PowerSystem& sys, const Dispatch& x,
                                     const AttackVector& y, const SolverConfig& cfg = {},
                                     const std::string& trace_path = "");

/// Infinity norm of the stacked KKT residual at the solution's fields.
double kkt_residual(const PowerSystem& sys, const Dispatch& x, const AttackVector& y,
                    const ThirdStageSolution& sol);

/// |mu' h| at the solution.
double complementarity_gap(const PowerSystem& sys, const ThirdStageSolution& sol);

/// Unscaled generation cost, $/h, for real outputs pg (length n_gen).
double contingency_cost(const PowerSystem& sys, const Vector& pg, const AttackVector& y);

/// Throws ContractViolation unless sol was computed for exactly (x, y).
void check_solution_matches(const ThirdStageSolution& sol, const Dispatch& x,
                            const AttackVector& y);

}  // namespace scopf
