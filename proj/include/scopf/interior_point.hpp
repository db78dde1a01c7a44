#pragma once

#include <memory>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "scopf/config.hpp"
#include "scopf/grid_model.hpp"
#include "scopf/network.hpp"

namespace scopf {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Position of every primal variable of an optimal-flow problem:
///   [ Pg (n_gen) | Qg (n_gen) | Vm (n_bus) | Va (n_bus - 1, no slack) | s (2 n_bus, optional) ]
struct FlowLayout {
  int n_bus = 0;
  int n_gen = 0;
  bool with_slack = false;
  int pg0 = 0, qg0 = 0, vm0 = 0, va0 = 0, s0 = -1;
  int size = 0;
  std::vector<int> va_index;  // bus -> variable, -1 at the slack bus

  FlowLayout() = default;
  FlowLayout(const PowerSystem& sys, bool with_slack);

  [[nodiscard]] int pg(int g) const { return pg0 + g; }
  [[nodiscard]] int qg(int g) const { return qg0 + g; }
  [[nodiscard]] int vm(int bus) const { return vm0 + bus; }
  [[nodiscard]] int va(int bus) const { return va_index[bus]; }
  [[nodiscard]] int s(int row) const { return s0 + row; }
  /// Variable of a network coordinate (vm_i -> i, va_i -> n_bus + i), -1 if fixed.
  [[nodiscard]] int coord(int c) const { return c < n_bus ? vm(c) : va(c - n_bus); }
};

/// Box constraint h = sign * (u[var] - value) <= 0. Upper bounds have sign
/// +1, lower bounds -1. `value` may depend on one dispatch coordinate and on
/// one outage slot; the derivatives are recorded for implicit differentiation.
struct FlowBound {
  int var = 0;
  double sign = 1.0;
  double value = 0.0;
  int x_coord = -1;
  double dvalue_dx = 0.0;
  int y_slot = -1;
  double dvalue_dy = 0.0;

  [[nodiscard]] double h(const Vector& u) const { return sign * (u[var] - value); }
};

/// min  cost_scale * sum cost(Pg) + slack_weight/2 |s|^2 + angle_reg/2 |Va|^2 + linear' u
/// s.t. Pg - Pd - P(V) (+ s_P) = 0,  Qg - Qd - Q(V) (+ s_Q) = 0,  bounds.
struct FlowProblem {
  const PowerSystem* sys = nullptr;
  FlowLayout layout;
  std::vector<double> branch_scale;
  Vector pd;
  Vector qd;
  double cost_scale = 1e-3;
  double slack_weight = 1e7;
  double angle_reg = 1e-8;
  std::vector<FlowBound> bounds;
  Vector linear;  // empty or layout.size
  NetworkEquations net;

  FlowProblem(const PowerSystem& sys, bool with_slack, std::vector<double> branch_scale,
              const SolverConfig& cfg);

  [[nodiscard]] int n_primal() const { return layout.size; }
  [[nodiscard]] int n_eq() const { return 2 * layout.n_bus; }
  [[nodiscard]] int n_ineq() const { return static_cast<int>(bounds.size()); }
  [[nodiscard]] int dim() const { return n_primal() + n_eq() + n_ineq(); }

  /// Objective without the angle regularization and linear term.
  [[nodiscard]] double loss(const Vector& u) const;
  /// Flow residuals (g + s), length 2 n_bus.
  [[nodiscard]] Vector constraints(const Vector& u) const;
  /// Adds a lower and an upper bound on variable `var`.
  void add_box(int var, double lo, double hi);
};

/// Primal-dual point with the barrier level it belongs to.
struct KktPoint {
  Vector u;
  Vector lambda;
  Vector mu;
  double eps = 0.0;

  [[nodiscard]] Vector stacked() const;
};

/// F = [ grad f + Ag' lambda + B' mu ; g(u) (+ s) ; mu .* h + eps ].
Vector kkt_residual(const FlowProblem& prob, const KktPoint& pt);
/// dF / d(u, lambda, mu).
SparseMatrix kkt_jacobian(const FlowProblem& prob, const KktPoint& pt);

/// LU factors of one KKT Jacobian, solvable with the matrix or its transpose.
/// Every factorization and solve is counted in counters().
class KktFactorization {
 public:
  explicit KktFactorization(const SparseMatrix& jac);
  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] Vector solve(const Vector& rhs) const;
  [[nodiscard]] Vector solve_transpose(const Vector& rhs) const;

 private:
  int dim_;
  mutable Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
};

struct IpOptions {
  double kkt_tol = 1e-6;
  double barrier_init = 0.1;
  double barrier_factor = 0.2;
  double barrier_min = 1e-8;
  int max_newton = 100;
  double tau = 0.995;
  double bound_push = 1e-2;

  static IpOptions from(const SolverConfig& cfg);
};

struct IpResult {
  KktPoint point;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> residual_history;
  std::vector<double> barrier_history;
  /// Factors of the Jacobian of the last Newton step. That step starts at a
  /// point already within kkt_tol, so these are the factors at the solution.
  std::shared_ptr<const KktFactorization> factorization;
  Vector rhs;  // -F at the factored point
};

/// Moves u strictly inside every bound.
void push_inside_bounds(const FlowProblem& prob, Vector& u, double kappa);

/// Barrier schedule eps_k = init * factor^k down to the first level <= barrier_min;
/// Newton steps with fraction-to-boundary on primal and dual variables.
/// Throws SingularMatrixError or ConvergenceError (with the residual history).
IpResult solve_interior_point(const FlowProblem& prob, Vector u0, const IpOptions& opts,
                              const Vector* lambda0 = nullptr);

/// Final barrier level reached by the schedule.
double final_barrier(const IpOptions& opts);

}  // namespace scopf
