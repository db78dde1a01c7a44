#include "scopf/third_stage.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "scopf/errors.hpp"
#include "scopf/instrumentation.hpp"

namespace scopf {

namespace {

constexpr double kMinWidth = 1e-6;

// One side of an interval together with what its value depends on.
struct Side {
  double value = 0.0;
  int x_coord = -1;
  double dx = 0.0;
  int y_slot = -1;
  double dy = 0.0;
};

void add_interval(FlowProblem& prob, int var, Side lo, Side hi) {
  if (hi.value - lo.value < kMinWidth) {
    // Degenerate interval (e.g. a generator fully out): keep a tiny box
    // centred on the midpoint, which moves with both sides.
    Side mid;
    mid.value = 0.5 * (lo.value + hi.value);
    mid.x_coord = lo.x_coord >= 0 ? lo.x_coord : hi.x_coord;
    mid.dx = 0.5 * (lo.dx + hi.dx);
    mid.y_slot = lo.y_slot >= 0 ? lo.y_slot : hi.y_slot;
    mid.dy = 0.5 * (lo.dy + hi.dy);
    lo = mid;
    hi = mid;
    lo.value -= 0.5 * kMinWidth;
    hi.value += 0.5 * kMinWidth;
  }
  prob.bounds.push_back({var, -1.0, lo.value, lo.x_coord, lo.dx, lo.y_slot, lo.dy});
  prob.bounds.push_back({var, 1.0, hi.value, hi.x_coord, hi.dx, hi.y_slot, hi.dy});
}

}  // namespace

void check_solution_matches(const ThirdStageSolution& sol, const Dispatch& x,
                            const AttackVector& y) {
  const Vector xf = x.flat();
  if (sol.x_flat.size() != xf.size() || sol.y.size() != y.y.size() || sol.x_flat != xf ||
      sol.y != y.y)
    throw ContractViolation("third-stage solution does not belong to the given (x, y)");
}

Vector ThirdStageSolution::pg(const PowerSystem& sys) const {
  Vector out(sys.n_gen());
  for (int g = 0; g < sys.n_gen(); ++g) {
    const int i = Dispatch::p_index(sys, g);
    out[g] = i < 0 ? w_cont.p_slack : z.p[i];
  }
  return out;
}

KktPoint ThirdStageSolution::point(const PowerSystem& sys) const {
  if (!problem) throw ContractViolation("third-stage solution carries no problem");
  const auto& lay = problem->layout;
  const int n = sys.n_bus();
  KktPoint pt;
  pt.u = Vector::Zero(lay.size);
  const Vector p = pg(sys);
  for (int g = 0; g < sys.n_gen(); ++g) {
    pt.u[lay.pg(g)] = p[g];
    pt.u[lay.qg(g)] = w_cont.qg[g];
  }
  for (int i = 0; i < n; ++i) {
    pt.u[lay.vm(i)] = w_cont.vm[i];
    if (lay.va(i) >= 0) pt.u[lay.va(i)] = w_cont.va[i];
  }
  for (int g = 0; g < sys.n_gen(); ++g) pt.u[lay.vm(sys.generators[g].bus)] = z.v[g];
  pt.u.segment(lay.s0, 2 * n) = s;
  pt.lambda = lambda;
  pt.mu = mu;
  pt.eps = barrier;
  return pt;
}

double ThirdStageSolution::f_cont(const PowerSystem& sys) const {
  if (!problem) throw ContractViolation("third-stage solution carries no problem");
  return problem->cost_scale * contingency_cost(sys, pg(sys), AttackVector{y, 0});
}

double ThirdStageSolution::slack_penalty() const {
  if (!problem) throw ContractViolation("third-stage solution carries no problem");
  return 0.5 * problem->slack_weight * s.squaredNorm();
}

double contingency_cost(const PowerSystem& sys, const Vector& pg, const AttackVector& y) {
  if (pg.size() != sys.n_gen()) throw DimensionError("generator output vector has wrong length");
  if (y.y.size() != 0 && y.y.size() != sys.n_outage())
    throw DimensionError("attack vector length mismatch");
  double total = 0.0;
  for (int g = 0; g < sys.n_gen(); ++g) total += sys.generators[g].cost.value(pg[g]);
  return total;
}

FlowProblem build_third_stage_problem(const PowerSystem& sys, const Dispatch& x,
                                      const AttackVector& y, const SolverConfig& cfg,
                                      std::vector<std::string>* diagnostics) {
  x.check(sys);
  FlowProblem prob(sys, true, branch_scaling(sys, &y), cfg);
  const auto& lay = prob.layout;
  const int ng = sys.n_gen();
  const auto lim = effective_generator_limits(sys, y);
  const auto slot = sys.generator_outage_slot();
  auto note = [&](const std::string& msg) {
    if (diagnostics != nullptr) diagnostics->push_back(msg);
  };

  for (int g = 0; g < ng; ++g) {
    const auto& gen = sys.generators[g];
    const int j = slot[g];
    const Side p_lo{lim[g].p_min, -1, 0.0, j, j >= 0 ? -gen.p_min : 0.0};
    const Side p_hi{lim[g].p_max, -1, 0.0, j, j >= 0 ? -gen.p_max : 0.0};
    const int xi = Dispatch::p_index(sys, g);
    if (xi < 0) {
      add_interval(prob, lay.pg(g), p_lo, p_hi);
    } else {
      const double xp = x.p[xi];
      const double window = gen.ramp * gen.p_max;
      const Side r_lo{xp - window, xi, 1.0, -1, 0.0};
      const Side r_hi{xp + window, xi, 1.0, -1, 0.0};
      const Side lo = r_lo.value >= p_lo.value ? r_lo : p_lo;
      const Side hi = r_hi.value <= p_hi.value ? r_hi : p_hi;
      if (lo.value > hi.value) {
        note("generator " + std::to_string(g) +
             ": ramp window does not meet the contingency limits; using the limits alone");
        add_interval(prob, lay.pg(g), p_lo, p_hi);
      } else {
        add_interval(prob, lay.pg(g), lo, hi);
      }
    }
    add_interval(prob, lay.qg(g), {lim[g].q_min, -1, 0.0, j, j >= 0 ? -gen.q_min : 0.0},
                 {lim[g].q_max, -1, 0.0, j, j >= 0 ? -gen.q_max : 0.0});
  }

  const auto gen_at = sys.generator_at_bus();
  for (int i = 0; i < sys.n_bus(); ++i) {
    const Side b_lo{sys.buses[i].v_min};
    const Side b_hi{sys.buses[i].v_max};
    const int g = gen_at[i];
    if (g < 0) {
      add_interval(prob, lay.vm(i), b_lo, b_hi);
      continue;
    }
    const int xi = (ng - 1) + g;
    const Side v_lo{x.v[g] - cfg.voltage_band, xi, 1.0, -1, 0.0};
    const Side v_hi{x.v[g] + cfg.voltage_band, xi, 1.0, -1, 0.0};
    const Side lo = v_lo.value >= b_lo.value ? v_lo : b_lo;
    const Side hi = v_hi.value <= b_hi.value ? v_hi : b_hi;
    if (lo.value > hi.value) {
      note("bus " + std::to_string(sys.buses[i].id) +
           ": voltage set point band outside bus limits; using the limits alone");
      add_interval(prob, lay.vm(i), b_lo, b_hi);
    } else {
      add_interval(prob, lay.vm(i), lo, hi);
    }
  }
  return prob;
}

ThirdStageSolution solve_third_stage(const PowerSystem& sys, const Dispatch& x,
                                     const AttackVector& y, const SolverConfig& cfg,
                                     const std::string& trace_path) {
  ++counters().third_stage_solves;
  if (!y.is_valid(1e-9)) throw ContractViolation("attack vector outside the threat set");

  ThirdStageSolution sol;
  auto prob = std::make_shared<FlowProblem>(build_third_stage_problem(sys, x, y, cfg, &sol.diagnostics));
  const auto& lay = prob->layout;
  const int n = sys.n_bus();

  // Initial point: x's settings and the power flow of the attacked network.
  NetworkState w = NetworkState::flat(sys, x);
  try {
    PowerFlowOptions pf_opts;
    pf_opts.tol = cfg.pf_tol;
    pf_opts.max_iter = cfg.max_pf_iter;
    const auto pf = solve_power_flow(sys, x, &y, pf_opts);
    if (pf.converged) w = pf.state;
  } catch (const SingularMatrixError&) {
  }
  Vector u0 = Vector::Zero(lay.size);
  const Vector p0 = generator_outputs(sys, x, w);
  for (int g = 0; g < sys.n_gen(); ++g) {
    u0[lay.pg(g)] = p0[g];
    u0[lay.qg(g)] = w.qg[g];
  }
  for (int i = 0; i < n; ++i) {
    u0[lay.vm(i)] = w.vm[i];
    if (lay.va(i) >= 0) u0[lay.va(i)] = w.va[i];
  }

  IpResult ip;
  try {
    ip = solve_interior_point(*prob, u0, IpOptions::from(cfg));
  } catch (...) {
    if (!trace_path.empty()) {
      std::ofstream(trace_path) << "iteration,residual,barrier\n";
    }
    throw;
  }
  if (!trace_path.empty()) {
    std::ofstream trace(trace_path);
    trace << "iteration,residual,barrier\n";
    for (std::size_t k = 0; k < ip.residual_history.size(); ++k)
      trace << k << ',' << ip.residual_history[k] << ',' << ip.barrier_history[k] << '\n';
  }

  const Vector& u = ip.point.u;
  sol.z.p.resize(sys.n_gen() - 1);
  sol.z.v.resize(sys.n_gen());
  for (int g = 0; g < sys.n_gen(); ++g) {
    const int xi = Dispatch::p_index(sys, g);
    if (xi >= 0) sol.z.p[xi] = u[lay.pg(g)];
    sol.z.v[g] = u[lay.vm(sys.generators[g].bus)];
  }
  sol.w_cont.vm = u.segment(lay.vm0, n);
  sol.w_cont.va = Vector::Zero(n);
  for (int i = 0; i < n; ++i)
    if (lay.va(i) >= 0) sol.w_cont.va[i] = u[lay.va(i)];
  sol.w_cont.qg = u.segment(lay.qg0, sys.n_gen());
  sol.w_cont.p_slack = u[lay.pg(sys.slack_generator())];
  sol.s = u.segment(lay.s0, 2 * n);
  sol.lambda = ip.point.lambda;
  sol.mu = ip.point.mu;
  sol.barrier = ip.point.eps;
  sol.kkt_factorization = std::move(ip.factorization);
  sol.rhs_b = std::move(ip.rhs);
  sol.converged = ip.converged;
  sol.iterations = ip.iterations;
  sol.residual = ip.residual;
  sol.residual_history = std::move(ip.residual_history);
  sol.x_flat = x.flat();
  sol.y = y.y;
  sol.problem = std::move(prob);
  return sol;
}

double kkt_residual(const PowerSystem& sys, const Dispatch& x, const AttackVector& y,
                    const ThirdStageSolution& sol) {
  check_solution_matches(sol, x, y);
  return kkt_residual(*sol.problem, sol.point(sys)).lpNorm<Eigen::Infinity>();
}

double complementarity_gap(const PowerSystem& sys, const ThirdStageSolution& sol) {
  const KktPoint pt = sol.point(sys);
  double gap = 0.0;
  for (int k = 0; k < sol.problem->n_ineq(); ++k) gap += pt.mu[k] * sol.problem->bounds[k].h(pt.u);
  return std::abs(gap);
}

}  // namespace scopf
