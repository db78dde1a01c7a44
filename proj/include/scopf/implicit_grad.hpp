#pragma once

#include <functional>
#include <vector>

#include "scopf/third_stage.hpp"

namespace scopf {

/// d(attack loss)/dy split into the direct dependence of the loss on y
/// (identically zero for this loss) and the part flowing through the solution.
struct AttackGradient {
  Vector total;
  Vector explicit_term;
  Vector implicit_term;
};

struct StencilEntry {
  int row = 0;
  double value = 0.0;
};

/// For every outage slot j, the nonzeros of r_j = -dF/dy_j, the derivative
/// of the Newton fixed point F(p; x, y) = 0 with the solution p held fixed.
/// A branch touches four stationarity rows and four flow rows; a generator
/// touches the complementarity rows of its (at most four) limit bounds.
struct SparseDerivativeStencil {
  static constexpr int kMaxNonzeros = 20;
  std::vector<std::vector<StencilEntry>> per_device;

  [[nodiscard]] int max_nonzeros() const;
};

SparseDerivativeStencil derivative_stencil(const PowerSystem& sys, const ThirdStageSolution& sol);

/// Loss sensitivity d(attack loss)/dp stacked over the KKT unknowns.
Vector loss_sensitivity(const PowerSystem& sys, const ThirdStageSolution& sol);

/// v' r_j for every outage slot j. v has the KKT dimension.
Vector djdy_vjp(const PowerSystem& sys, const Dispatch& x, const AttackVector& y,
                const ThirdStageSolution& sol, const Vector& v);

/// Gradient of the attack loss by one transpose solve with the stored
/// factorization. Throws ContractViolation when sol does not belong to (x, y)
/// and NumericalError on non-finite output.
AttackGradient attack_gradient(const PowerSystem& sys, const Dispatch& x, const AttackVector& y,
                               const ThirdStageSolution& sol);

struct FiniteDiffGradient {
  Vector grad;
  std::vector<bool> one_sided;
};

/// Central differences of f inside the box [lo, hi]; coordinates within h of
/// a side use a one-sided difference instead.
FiniteDiffGradient finite_difference(const std::function<double(const Vector&)>& f,
                                     const Vector& at, double h, double lo, double hi);

/// Finite differences of the attack loss in y, one fresh third-stage solve
/// per evaluation.
FiniteDiffGradient finite_diff_gradient(const PowerSystem& sys, const Dispatch& x,
                                        const AttackVector& y, double h,
                                        const SolverConfig& cfg = {});

/// cost_scale * generation cost at x with the slack output from the base
/// power flow.
double base_cost(const PowerSystem& sys, const Dispatch& x, const SolverConfig& cfg = {});

/// Gradient in x of base_cost(x) + attack loss at the fixed y, both through
/// implicit differentiation (power-flow Jacobian for the first, stored KKT
/// factors for the second).
Vector outer_gradient(const PowerSystem& sys, const Dispatch& x, const AttackVector& y,
                      const ThirdStageSolution& sol, const SolverConfig& cfg = {});

}  // namespace scopf
