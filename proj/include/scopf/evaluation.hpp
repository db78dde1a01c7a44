#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scopf/third_stage.hpp"

namespace scopf {

/// Full outage of a set of distinct outage slots, kept sorted.
struct ContingencyScenario {
  std::vector<int> devices;

  friend bool operator==(const ContingencyScenario&, const ContingencyScenario&) = default;
};

/// Number of size-subsets of n items (saturates at UINT64_MAX).
std::uint64_t binomial(int n, int size);

/// `count` distinct size-subsets of the outage slots drawn uniformly without
/// replacement, or all of them in lexicographic order when count reaches the
/// number of subsets.
std::vector<ContingencyScenario> sample_contingencies(const PowerSystem& sys, int size,
                                                      std::uint64_t count, std::uint64_t seed);

enum class Outcome { feasible, infeasible, solver_failure };
std::string to_string(Outcome o);

struct ScenarioOutcome {
  ContingencyScenario scenario;
  Outcome outcome = Outcome::feasible;
  double slack_norm = 0.0;  // |s|_inf, p.u. (NaN on solver failure)
  std::string message;      // solver error text on failure

  [[nodiscard]] bool violation() const { return outcome != Outcome::feasible; }
};

/// Discrete outage of the scenario followed by a third-stage solve; feasible
/// iff the solve converges with |s|_inf <= tol.
ScenarioOutcome check_feasibility(const PowerSystem& sys, const Dispatch& x,
                                  const ContingencyScenario& scenario, double tol = 1e-4,
                                  const SolverConfig& solver = {});

struct SizeCounts {
  int size = 0;
  int scenarios = 0;
  int feasible = 0;
  int infeasible = 0;
  int solver_failures = 0;

  [[nodiscard]] int violations() const { return infeasible + solver_failures; }
};

struct ViolationReport {
  std::vector<ScenarioOutcome> outcomes;  // in scenario order
  std::vector<SizeCounts> by_size;        // ascending size
  double tol = 1e-4;
  std::uint64_t seed = 0;
  std::string digest;  // SHA-256 of the scenario list
  // Feasible scenarios with an evaluated infeasible subset one device smaller.
  int superset_checks = 0;
  int feasible_supersets_of_infeasible = 0;

  [[nodiscard]] int total_violations() const;
};

/// SHA-256 (hex) of the scenario list, one "i,j,k" line per scenario.
std::string scenario_digest(const std::vector<ContingencyScenario>& scenarios);

/// Evaluates every scenario on up to `parallelism` threads. The report does
/// not depend on the thread count or on completion order.
ViolationReport evaluate_dispatch(const PowerSystem& sys, const Dispatch& x,
                                  const std::vector<ContingencyScenario>& scenarios,
                                  int parallelism = 1, double tol = 1e-4,
                                  const SolverConfig& solver = {}, std::uint64_t seed = 0);

}  // namespace scopf
