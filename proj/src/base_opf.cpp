#include <cmath>

#include "scopf/errors.hpp"
#include "scopf/instrumentation.hpp"
#include "scopf/powerflow.hpp"

namespace scopf {

namespace {

constexpr double kMinWidth = 1e-6;

void add_box_min_width(FlowProblem& prob, int var, double lo, double hi) {
  if (hi - lo < kMinWidth) {
    const double mid = 0.5 * (lo + hi);
    lo = mid - 0.5 * kMinWidth;
    hi = mid + 0.5 * kMinWidth;
  }
  prob.add_box(var, lo, hi);
}

}  // namespace

int dispatch_variable(const PowerSystem& sys, const FlowLayout& lay, int i) {
  const int ng = sys.n_gen();
  if (i < 0 || i >= 2 * ng - 1) throw DimensionError("dispatch coordinate out of range");
  if (i < ng - 1) {
    const int slack = sys.slack_generator();
    return lay.pg(i < slack ? i : i + 1);
  }
  return lay.vm(sys.generators[i - (ng - 1)].bus);
}

FlowProblem build_base_opf_problem(const PowerSystem& sys, const SolverConfig& cfg,
                                   const Vector& dispatch_linear) {
  const int ng = sys.n_gen();
  FlowProblem prob(sys, false, std::vector<double>(sys.branches.size(), 1.0), cfg);
  const auto& lay = prob.layout;
  for (int g = 0; g < ng; ++g) {
    const auto& gen = sys.generators[g];
    add_box_min_width(prob, lay.pg(g), gen.p_min, gen.p_max);
    add_box_min_width(prob, lay.qg(g), gen.q_min, gen.q_max);
  }
  for (int i = 0; i < sys.n_bus(); ++i) prob.add_box(lay.vm(i), sys.buses[i].v_min, sys.buses[i].v_max);

  if (dispatch_linear.size() > 0) {
    if (dispatch_linear.size() != 2 * ng - 1)
      throw DimensionError("dispatch linear term has wrong length");
    prob.linear = Vector::Zero(lay.size);
    for (int i = 0; i < 2 * ng - 1; ++i)
      prob.linear[dispatch_variable(sys, lay, i)] += dispatch_linear[i];
  }
  return prob;
}

BaseOpfResult solve_base_opf(const PowerSystem& sys, const SolverConfig& cfg,
                             const BaseOpfOptions& opts) {
  ++counters().base_opf_solves;
  const int n = sys.n_bus();
  const int ng = sys.n_gen();

  double p_cap = 0.0;
  for (const auto& g : sys.generators) p_cap += g.p_max;
  const double demand = sys.bus_demand_p().sum();
  if (demand > p_cap)
    throw InfeasibleError("total demand exceeds total generator capacity", demand - p_cap);

  FlowProblem prob = build_base_opf_problem(sys, cfg, opts.dispatch_linear);
  const auto& lay = prob.layout;

  Vector u0;
  const Vector* lambda0 = nullptr;
  if (opts.warm_start != nullptr) {
    u0 = opts.warm_start->point.u;
    lambda0 = &opts.warm_start->point.lambda;
  } else {
    // Start from the nominal power flow when it solves, else from a flat profile.
    u0 = Vector::Zero(lay.size);
    const Dispatch x0 = nominal_dispatch(sys);
    NetworkState w = NetworkState::flat(sys, x0);
    try {
      const auto pf = solve_power_flow(sys, x0);
      if (pf.converged) w = pf.state;
    } catch (const SingularMatrixError&) {
    }
    const Vector pg = generator_outputs(sys, x0, w);
    for (int g = 0; g < ng; ++g) {
      u0[lay.pg(g)] = pg[g];
      u0[lay.qg(g)] = w.qg[g];
    }
    for (int i = 0; i < n; ++i) {
      u0[lay.vm(i)] = w.vm[i];
      if (lay.va(i) >= 0) u0[lay.va(i)] = w.va[i];
    }
  }

  IpResult ip;
  try {
    ip = solve_interior_point(prob, u0, IpOptions::from(cfg), lambda0);
  } catch (const ConvergenceError& e) {
    const auto& h = e.residual_history();
    throw InfeasibleError(std::string("base OPF failed: ") + e.what(), h.empty() ? 0.0 : h.back());
  }

  BaseOpfResult res;
  const Vector& u = ip.point.u;
  res.x.p.resize(ng - 1);
  res.x.v.resize(ng);
  for (int i = 0; i < 2 * ng - 1; ++i) {
    const double val = u[dispatch_variable(sys, lay, i)];
    if (i < ng - 1)
      res.x.p[i] = val;
    else
      res.x.v[i - (ng - 1)] = val;
  }
  res.state.vm = u.segment(lay.vm0, n);
  res.state.va = Vector::Zero(n);
  for (int i = 0; i < n; ++i)
    if (lay.va(i) >= 0) res.state.va[i] = u[lay.va(i)];
  res.state.qg = u.segment(lay.qg0, ng);
  res.state.p_slack = u[lay.pg(sys.slack_generator())];
  res.objective = generation_cost(sys, u.segment(lay.pg0, ng), 1.0);
  res.iterations = ip.iterations;
  res.kkt_residual = ip.residual;
  res.point = std::move(ip.point);
  return res;
}

}  // namespace scopf
