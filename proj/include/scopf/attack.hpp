#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "scopf/implicit_grad.hpp"

namespace scopf {

/// Euclidean projection onto {y in [0,1]^n : sum(y) <= k}.
AttackVector project_attack(const Vector& y_raw, int k);

enum class InitStrategy { uniform_small, random, warm_start };

InitStrategy parse_init_strategy(const std::string& name);
std::string to_string(InitStrategy s);

/// Starting point of an attack. warm_start projects *y_prev (required).
AttackVector init_attack(const PowerSystem& sys, int k, InitStrategy strategy, std::uint64_t seed,
                         const Vector* y_prev = nullptr);

/// Uniform double in [0, 1) from 53 random bits; identical on every platform.
double uniform01(std::uint64_t bits);

struct AttackConfig {
  double step_size = 0.1;
  int max_iters = 10;
  double tolerance = 1e-4;  // on |y_{t+1} - y_t|_inf
  InitStrategy init = InitStrategy::uniform_small;
  std::uint64_t seed = 0;
  bool backtracking = true;
  int max_backtracks = 6;
  int failure_retries = 3;
};

struct AttackIteration {
  int iteration = 0;
  double loss = 0.0;       // attack loss after the step
  double grad_norm = 0.0;  // infinity norm of the gradient the step used
  double step = 0.0;
  bool projection_active = false;
  int backtracks = 0;
};

struct AttackTrace {
  double initial_loss = 0.0;
  std::vector<AttackIteration> iterations;
  AttackVector final_y;
  bool converged = false;
  std::string stop_reason;

  /// iteration,loss,grad_norm,step,projection_active,backtracks; row 0 is the start.
  void write_csv(std::ostream& out) const;
};

struct AttackResult {
  AttackVector y;
  ThirdStageSolution solution;
  AttackTrace trace;
  double loss = 0.0;
};

/// Projected gradient ascent on the attack loss. Steps move the largest
/// gradient coordinate by step_size (the gradient is scaled by its infinity
/// norm) and are halved while they fail to increase the loss. Returns the
/// best iterate with its solution.
AttackResult find_worst_case_attack(const PowerSystem& sys, const Dispatch& x, int k,
                                    const AttackConfig& cfg, const SolverConfig& solver = {},
                                    const Vector* y_prev = nullptr);

}  // namespace scopf
