#include "scopf/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "scopf/errors.hpp"

namespace scopf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

void ScopfConfig::validate() const {
  std::vector<std::string> bad;
  auto need = [&](bool ok, const char* what) {
    if (!ok) bad.emplace_back(what);
  };
  need(k >= 1, "k must be at least 1");
  need(attack.step_size >= 0.0, "attack.step_size must be nonnegative");
  need(attack.max_iters >= 0, "attack.max_iters must be nonnegative");
  need(attack.tolerance > 0.0, "attack.tolerance must be positive");
  need(defense.base_tol > 0.0, "defense.base_tol must be positive");
  need(defense.damping > 0.0 && defense.damping <= 1.0, "defense.damping must be in (0, 1]");
  need(defense.max_retries >= 0, "defense.max_retries must be nonnegative");
  need(attack.max_backtracks >= 0, "attack.max_backtracks must be nonnegative");
  need(attack.failure_retries >= 0, "attack.failure_retries must be nonnegative");
  need(loss_backtracks >= 0, "defense.loss_backtracks must be nonnegative");
  need(max_stalls >= 1, "defense.max_stalls must be at least 1");
  need(outer.max_outer >= 1, "outer.max_outer must be at least 1");
  need(outer.loss_tol > 0.0, "outer.loss_tol must be positive");
  need(outer.window >= 2, "outer.window must be at least 2");
  need(outer.dispatch_tol > 0.0, "outer.dispatch_tol must be positive");
  need(solver.kkt_tol > 0.0, "solver.kkt_tol must be positive");
  need(solver.pf_tol > 0.0, "solver.pf_tol must be positive");
  need(solver.barrier_min > 0.0, "solver.barrier_min must be positive");
  need(solver.barrier_init > 0.0, "solver.barrier_init must be positive");
  need(solver.barrier_factor > 0.0 && solver.barrier_factor < 1.0,
       "solver.barrier_factor must be in (0, 1)");
  need(solver.max_pf_iter >= 1, "solver.max_pf_iter must be at least 1");
  need(solver.angle_reg >= 0.0, "solver.angle_reg must be nonnegative");
  need(solver.voltage_band > 0.0, "solver.voltage_band must be positive");
  need(solver.max_newton >= 1, "solver.max_newton must be at least 1");
  need(solver.slack_weight > 0.0, "solver.slack_weight must be positive");
  need(solver.cost_scale > 0.0, "solver.cost_scale must be positive");
  if (bad.empty()) return;
  std::string msg = "invalid configuration:";
  for (const auto& b : bad) msg += "\n  " + b;
  throw ContractViolation(msg);
}

LossBreakdown loss(const PowerSystem& sys, const Dispatch& x, const AttackVector& y,
                   const ThirdStageSolution& sol, const SolverConfig& solver) {
  check_solution_matches(sol, x, y);
  LossBreakdown l;
  l.f_base = base_cost(sys, x, solver);
  l.f_cont = sol.f_cont(sys);
  l.slack_penalty = sol.slack_penalty();
  l.total = l.f_base + l.f_cont + l.slack_penalty;
  return l;
}

ConvergenceDecision convergence_check(const RunHistory& history, const ScopfConfig& cfg) {
  ConvergenceDecision d;
  const auto& r = history.records;
  std::vector<std::string> fired;
  if (r.size() >= 2 && r.back().dispatch_change <= cfg.outer.dispatch_tol)
    fired.emplace_back("dispatch change below tolerance");
  const auto w = static_cast<std::size_t>(cfg.outer.window);
  if (r.size() >= std::max<std::size_t>(w, 2)) {
    bool flat = true;
    for (std::size_t i = r.size() - w + 1; i < r.size(); ++i) {
      const double a = r[i - 1].post.total;
      const double b = r[i].post.total;
      if (std::abs(b - a) > cfg.outer.loss_tol * std::max(std::abs(a), 1e-12)) flat = false;
    }
    if (flat) fired.emplace_back("loss change below tolerance over window");
  }
  if (static_cast<int>(r.size()) >= cfg.outer.max_outer) {
    fired.emplace_back("max_outer reached");
    d.flagged = true;
  }
  d.converged = !fired.empty();
  d.flagged = d.flagged && fired.size() == 1;
  for (const auto& f : fired) d.reason += (d.reason.empty() ? "" : "; ") + f;
  if (!d.converged) d.reason = r.empty() ? "no iterations recorded" : "not converged";
  return d;
}

ScopfResult run_scopf(const PowerSystem& sys, const ScopfConfig& cfg,
                      const IterationCallback& on_iteration) {
  cfg.validate();
  ScopfResult out;
  out.base = solve_base_opf(sys, cfg.solver);
  Dispatch x = out.base.x;
  out.history.x_init = x;
  auto& hist = out.history;

  if (sys.n_outage() == 0) {
    IterationRecord rec;
    rec.iteration = 1;
    rec.y_star = AttackVector::zeros(0, cfg.k);
    const auto t0 = Clock::now();
    const auto sol = solve_third_stage(sys, x, rec.y_star, cfg.solver);
    rec.pre = rec.post = loss(sys, x, rec.y_star, sol, cfg.solver);
    rec.seconds.evaluation = seconds_since(t0);
    rec.x = x;
    hist.records.push_back(rec);
    if (on_iteration) on_iteration(hist.records.back());
    hist.converged = true;
    hist.reason = "no outage-eligible devices";
    out.x = x;
    return out;
  }

  BaseOpfResult warm = out.base;
  Vector y_prev;
  int stalls = 0;
  for (int it = 1; it <= cfg.outer.max_outer; ++it) {
    IterationRecord rec;
    rec.iteration = it;

    auto t0 = Clock::now();
    AttackConfig ac = cfg.attack;
    const bool warm_attack = cfg.warm_start && y_prev.size() > 0;
    if (warm_attack) ac.init = InitStrategy::warm_start;
    auto att = find_worst_case_attack(sys, x, cfg.k, ac, cfg.solver, warm_attack ? &y_prev : nullptr);
    rec.seconds.attack = seconds_since(t0);
    rec.y_star = att.y;
    rec.attack = att.trace;
    rec.attack_steps = static_cast<int>(att.trace.iterations.size());
    rec.pre = loss(sys, x, att.y, att.solution, cfg.solver);

    t0 = Clock::now();
    const auto d = defense_step(sys, x, att.y, att.solution, cfg.defense, cfg.solver, &warm);
    rec.seconds.defense = seconds_since(t0);
    rec.base_kkt_residual = d.base_kkt_residual;
    rec.coupling_norm = d.coupling_norm;
    rec.stalled = d.stalled;

    // Accept x' only if it lowers the loss against the fixed y*.
    t0 = Clock::now();
    Dispatch x_next = x;
    rec.post = rec.pre;
    if (!d.stalled) {
      double eta = d.damping;
      std::optional<Dispatch> cand = d.x;
      double pf_res = d.base_pf_residual;
      for (int b = 0; b <= cfg.loss_backtracks; ++b) {
        if (cand) {
          try {
            const auto sol = solve_third_stage(sys, *cand, att.y, cfg.solver);
            const auto l = loss(sys, *cand, att.y, sol, cfg.solver);
            if (l.total < rec.pre.total) {
              x_next = *cand;
              rec.post = l;
              rec.damping = eta;
              rec.base_pf_residual = pf_res;
              break;
            }
          } catch (const ConvergenceError&) {
          } catch (const SingularMatrixError&) {
          }
        }
        eta *= 0.5;
        cand = damped_dispatch(sys, x, d.x_raw, eta, cfg.defense.base_tol, &pf_res);
      }
      warm = d.base;
    }
    rec.seconds.evaluation = seconds_since(t0);
    rec.dispatch_change = (x_next.flat() - x.flat()).lpNorm<Eigen::Infinity>();
    rec.x = x_next;
    x = x_next;
    y_prev = att.y.y;
    hist.records.push_back(std::move(rec));
    if (on_iteration) on_iteration(hist.records.back());

    stalls = hist.records.back().stalled ? stalls + 1 : 0;
    if (stalls >= cfg.max_stalls) {
      hist.reason = "defense stalled " + std::to_string(stalls) + " times in a row";
      break;
    }
    const auto dec = convergence_check(hist, cfg);
    if (dec.converged) {
      hist.converged = true;
      hist.max_outer_reached = dec.flagged;
      hist.reason = dec.reason;
      break;
    }
  }
  out.x = x;
  return out;
}

}  // namespace scopf
