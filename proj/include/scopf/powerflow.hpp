#pragma once

#include <optional>
#include <string>

#include "scopf/config.hpp"
#include "scopf/grid_model.hpp"
#include "scopf/interior_point.hpp"

namespace scopf {

/// First-stage decision: real power of every generator except the slack
/// generator (generator order) and voltage magnitude of every generator.
struct Dispatch {
  Vector p;  // n_gen - 1
  Vector v;  // n_gen

  /// Stacked [p; v], length 2 n_gen - 1.
  [[nodiscard]] Vector flat() const;
  static Dispatch from_flat(const PowerSystem& sys, const Vector& flat);
  /// Real power set point of generator g (the slack generator has none).
  [[nodiscard]] double p_of(const PowerSystem& sys, int g) const;
  /// Position of generator g in `p`, -1 for the slack generator.
  static int p_index(const PowerSystem& sys, int g);
  /// Throws DimensionError when sizes disagree with the system.
  void check(const PowerSystem& sys) const;
};

/// Setpoints copied from the case file.
Dispatch nominal_dispatch(const PowerSystem& sys);

/// Solved electrical state. Magnitudes and angles are stored for every bus;
/// the independent unknowns of a power-flow solve are the magnitudes at
/// buses without a generator, angles at non-slack buses, every generator's
/// reactive output and the slack generator's real output (2 n_bus in total).
struct NetworkState {
  Vector vm;        // n_bus
  Vector va;        // n_bus, va[slack] == 0
  Vector qg;        // n_gen
  double p_slack = 0.0;

  static NetworkState flat(const PowerSystem& sys, const Dispatch& x);
  /// The 2 n_bus independent unknowns in the order listed above.
  [[nodiscard]] Vector packed(const PowerSystem& sys) const;
};

struct PowerFlowResult {
  NetworkState state;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

struct PowerFlowOptions {
  double tol = 1e-8;
  int max_iter = 50;
  std::optional<NetworkState> warm_start;
  std::string trace_path;  // CSV (iteration,residual) when non-empty
};

/// Generation minus load minus network flow at every bus: P rows then Q rows.
/// Magnitudes at generator buses come from x.v.
Vector power_mismatch(const PowerSystem& sys, const Dispatch& x, const NetworkState& w,
                      const AttackVector* y = nullptr);

/// d(power_mismatch)/d(packed unknowns), 2 n_bus square.
Eigen::SparseMatrix<double> mismatch_jacobian(const PowerSystem& sys, const Dispatch& x,
                                              const NetworkState& w,
                                              const AttackVector* y = nullptr);

/// Newton power flow. Returns converged == false after max_iter residual
/// evaluations; throws SingularMatrixError if the Jacobian cannot be factored.
PowerFlowResult solve_power_flow(const PowerSystem& sys, const Dispatch& x,
                                 const AttackVector* y = nullptr,
                                 const PowerFlowOptions& opts = {});

/// cost_scale * sum of generator costs for real outputs pg (length n_gen).
double generation_cost(const PowerSystem& sys, const Vector& pg, double cost_scale);

/// Real output of every generator implied by x and a solved state.
Vector generator_outputs(const PowerSystem& sys, const Dispatch& x, const NetworkState& w);

struct BaseOpfResult {
  Dispatch x;
  NetworkState state;
  double objective = 0.0;  // $/h
  int iterations = 0;
  double kkt_residual = 0.0;
  KktPoint point;          // full primal-dual solution, usable as a warm start
};

struct BaseOpfOptions {
  /// Optional linear term c'x on the dispatch coordinates, length 2 n_gen - 1.
  Vector dispatch_linear;
  const BaseOpfResult* warm_start = nullptr;
};

/// Optimization variable holding dispatch coordinate i.
int dispatch_variable(const PowerSystem& sys, const FlowLayout& lay, int i);

/// The base OPF as a FlowProblem (no slack variables), optionally with a
/// linear term on the dispatch coordinates.
FlowProblem build_base_opf_problem(const PowerSystem& sys, const SolverConfig& cfg,
                                   const Vector& dispatch_linear = Vector());

/// Minimum-cost dispatch for the intact network, solved by the interior-point
/// core to cfg.kkt_tol. Throws InfeasibleError when the limits admit no dispatch.
BaseOpfResult solve_base_opf(const PowerSystem& sys, const SolverConfig& cfg = {},
                             const BaseOpfOptions& opts = {});

}  // namespace scopf
