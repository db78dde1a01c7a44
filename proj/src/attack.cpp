#include "scopf/attack.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <stdexcept>

#include "scopf/errors.hpp"

namespace scopf {

namespace {

double clipped_sum(const Vector& y, double tau) {
  return (y.array() - tau).cwiseMax(0.0).cwiseMin(1.0).sum();
}

}  // namespace

AttackVector project_attack(const Vector& y_raw, int k) {
  if (k < 0) throw std::invalid_argument("attack budget must be nonnegative");
  if (!y_raw.allFinite()) throw std::invalid_argument("attack vector has non-finite entries");
  AttackVector out{y_raw.cwiseMax(0.0).cwiseMin(1.0), k};
  if (out.y.sum() <= k) return out;
  // sum(clip(y - tau)) is continuous and nonincreasing in tau.
  double lo = 0.0;
  double hi = y_raw.maxCoeff();
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (clipped_sum(y_raw, mid) > k)
      lo = mid;
    else
      hi = mid;
  }
  out.y = (y_raw.array() - hi).cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

InitStrategy parse_init_strategy(const std::string& name) {
  if (name == "uniform_small") return InitStrategy::uniform_small;
  if (name == "random") return InitStrategy::random;
  if (name == "warm_start") return InitStrategy::warm_start;
  throw std::invalid_argument("unknown attack init strategy: " + name);
}

std::string to_string(InitStrategy s) {
  switch (s) {
    case InitStrategy::uniform_small: return "uniform_small";
    case InitStrategy::random: return "random";
    case InitStrategy::warm_start: return "warm_start";
  }
  return "unknown";
}

double uniform01(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

AttackVector init_attack(const PowerSystem& sys, int k, InitStrategy strategy, std::uint64_t seed,
                         const Vector* y_prev) {
  const int n = sys.n_outage();
  switch (strategy) {
    case InitStrategy::uniform_small: {
      const double v = n > 0 ? std::min(static_cast<double>(k) / n, 0.01) : 0.0;
      return {Vector::Constant(n, v), k};
    }
    case InitStrategy::random: {
      std::mt19937_64 rng(seed);
      Vector y(n);
      for (int j = 0; j < n; ++j) y[j] = uniform01(rng());
      return project_attack(y, k);
    }
    case InitStrategy::warm_start:
      if (y_prev == nullptr) throw std::invalid_argument("warm_start needs a previous attack");
      if (y_prev->size() != n) throw DimensionError("previous attack has wrong length");
      return project_attack(*y_prev, k);
  }
  throw std::invalid_argument("unknown attack init strategy");
}

void AttackTrace::write_csv(std::ostream& out) const {
  out << "iteration,loss,grad_norm,step,projection_active,backtracks\n";
  out << std::setprecision(17);
  out << 0 << ',' << initial_loss << ",,,,\n";
  for (const auto& it : iterations)
    out << it.iteration << ',' << it.loss << ',' << it.grad_norm << ',' << it.step << ','
        << (it.projection_active ? 1 : 0) << ',' << it.backtracks << '\n';
}

AttackResult find_worst_case_attack(const PowerSystem& sys, const Dispatch& x, int k,
                                    const AttackConfig& cfg, const SolverConfig& solver,
                                    const Vector* y_prev) {
  if (k < 0) throw std::invalid_argument("attack budget must be nonnegative");
  const int n = sys.n_outage();
  const int budget = std::min(k, n);

  AttackResult res;
  if (budget == 0) {
    res.y = AttackVector::zeros(n, k);
    res.solution = solve_third_stage(sys, x, res.y, solver);
    res.loss = res.solution.attack_loss(sys);
    res.trace.initial_loss = res.loss;
    res.trace.final_y = res.y;
    res.trace.converged = true;
    res.trace.stop_reason = "empty threat set";
    return res;
  }

  AttackVector y = init_attack(sys, budget, cfg.init, cfg.seed, y_prev);
  ThirdStageSolution sol = solve_third_stage(sys, x, y, solver);
  double loss = sol.attack_loss(sys);
  res.trace.initial_loss = loss;
  res.y = y;
  res.solution = sol;
  res.loss = loss;

  for (int t = 1; t <= cfg.max_iters; ++t) {
    const Vector g = attack_gradient(sys, x, y, sol).total;
    const double gn = g.lpNorm<Eigen::Infinity>();
    if (gn == 0.0) {
      res.trace.converged = true;
      res.trace.stop_reason = "zero gradient";
      break;
    }
    const Vector dir = g / gn;

    double step = cfg.step_size;
    int failures = 0;
    int backtracks = 0;
    bool accepted = false;
    bool proj_active = false;
    AttackVector y_new;
    ThirdStageSolution sol_new;
    double loss_new = 0.0;
    while (true) {
      const Vector raw = y.y + step * dir;
      y_new = project_attack(raw, budget);
      proj_active = (y_new.y - raw).lpNorm<Eigen::Infinity>() > 0.0;
      try {
        sol_new = solve_third_stage(sys, x, y_new, solver);
      } catch (const ConvergenceError&) {
        if (++failures > cfg.failure_retries) break;
        step *= 0.5;
        continue;
      } catch (const SingularMatrixError&) {
        if (++failures > cfg.failure_retries) break;
        step *= 0.5;
        continue;
      }
      loss_new = sol_new.attack_loss(sys);
      if (cfg.backtracking && loss_new < loss) {
        if (backtracks >= cfg.max_backtracks) break;
        ++backtracks;
        step *= 0.5;
        continue;
      }
      accepted = true;
      break;
    }
    if (!accepted) {
      res.trace.stop_reason =
          failures > cfg.failure_retries ? "third-stage failure" : "no ascent step found";
      break;
    }

    res.trace.iterations.push_back({t, loss_new, gn, step, proj_active, backtracks});
    const double dy = (y_new.y - y.y).lpNorm<Eigen::Infinity>();
    y = std::move(y_new);
    sol = std::move(sol_new);
    loss = loss_new;
    if (loss > res.loss) {
      res.y = y;
      res.solution = sol;
      res.loss = loss;
    }
    if (dy <= cfg.tolerance) {
      res.trace.converged = true;
      res.trace.stop_reason = "step below tolerance";
      break;
    }
  }
  if (res.trace.stop_reason.empty()) res.trace.stop_reason = "iteration limit";
  res.y.k = k;
  res.trace.final_y = res.y;
  return res;
}

}  // namespace scopf
