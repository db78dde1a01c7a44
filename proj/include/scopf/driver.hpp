#pragma once

#include <functional>
#include <string>
#include <vector>

#include "scopf/attack.hpp"
#include "scopf/defense.hpp"

namespace scopf {

struct OuterConfig {
  int max_outer = 50;
  double loss_tol = 1e-4;  // relative change of the post-defense loss
  int window = 3;          // records the loss rule looks at
  double dispatch_tol = 1e-5;
};

struct ScopfConfig {
  int k = 2;
  AttackConfig attack;
  bool warm_start = true;  // start each attack from the previous y*
  DefenseConfig defense;
  int loss_backtracks = 12;  // halvings of eta while the post-defense loss does not drop
  int max_stalls = 3;
  OuterConfig outer;
  SolverConfig solver;

  /// Throws ContractViolation listing every invalid field.
  void validate() const;
};

struct LossBreakdown {
  double f_base = 0.0;
  double f_cont = 0.0;
  double slack_penalty = 0.0;
  double total = 0.0;
};

/// f_base(x) (with the base power-flow slack output), f_cont and the slack
/// penalty of sol, all in scaled cost units.
LossBreakdown loss(const PowerSystem& sys, const Dispatch& x, const AttackVector& y,
                   const ThirdStageSolution& sol, const SolverConfig& solver = {});

struct StageTimes {
  double attack = 0.0;
  double defense = 0.0;
  double evaluation = 0.0;
};

struct IterationRecord {
  int iteration = 0;
  AttackVector y_star;
  LossBreakdown pre;   // at (x, y*) before the defense step
  LossBreakdown post;  // at (x', y*)
  AttackTrace attack;
  int attack_steps = 0;
  double base_kkt_residual = 0.0;
  double base_pf_residual = 0.0;
  double coupling_norm = 0.0;
  double damping = 0.0;  // eta of the accepted step, 0 when x was kept
  bool stalled = false;
  double dispatch_change = 0.0;
  Dispatch x;  // dispatch after the iteration
  StageTimes seconds;  // wall times, kept out of deterministic reports
};

struct RunHistory {
  Dispatch x_init;
  std::vector<IterationRecord> records;
  bool converged = false;
  bool max_outer_reached = false;
  std::string reason;
};

struct ConvergenceDecision {
  bool converged = false;
  bool flagged = false;  // stopped by the iteration limit
  std::string reason;
};

ConvergenceDecision convergence_check(const RunHistory& history, const ScopfConfig& cfg);

struct ScopfResult {
  Dispatch x;
  RunHistory history;
  BaseOpfResult base;
};

using IterationCallback = std::function<void(const IterationRecord&)>;

/// Base OPF, then alternating worst-case attack and defense step until
/// convergence_check fires. The callback runs after every completed record.
ScopfResult run_scopf(const PowerSystem& sys, const ScopfConfig& cfg,
                      const IterationCallback& on_iteration = nullptr);

}  // namespace scopf
