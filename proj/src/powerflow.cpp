#include "scopf/powerflow.hpp"

#include <cmath>
#include <fstream>

#include <Eigen/SparseLU>

#include "scopf/errors.hpp"
#include "scopf/instrumentation.hpp"
#include "scopf/network.hpp"

namespace scopf {

// Dispatch -------------------------------------------------------------------

Vector Dispatch::flat() const {
  Vector out(p.size() + v.size());
  out << p, v;
  return out;
}

Dispatch Dispatch::from_flat(const PowerSystem& sys, const Vector& flat) {
  const int ng = sys.n_gen();
  if (flat.size() != 2 * ng - 1) throw DimensionError("dispatch vector has wrong length");
  return {flat.head(ng - 1), flat.tail(ng)};
}

int Dispatch::p_index(const PowerSystem& sys, int g) {
  const int slack = sys.slack_generator();
  if (g == slack) return -1;
  return g < slack ? g : g - 1;
}

double Dispatch::p_of(const PowerSystem& sys, int g) const {
  const int i = p_index(sys, g);
  if (i < 0) throw ContractViolation("the slack generator has no real-power set point");
  return p[i];
}

void Dispatch::check(const PowerSystem& sys) const {
  if (p.size() != sys.n_gen() - 1 || v.size() != sys.n_gen())
    throw DimensionError("dispatch dimensions do not match the system");
}

Dispatch nominal_dispatch(const PowerSystem& sys) {
  Dispatch x{Vector(sys.n_gen() - 1), Vector(sys.n_gen())};
  for (int g = 0; g < sys.n_gen(); ++g) {
    const int i = Dispatch::p_index(sys, g);
    if (i >= 0) x.p[i] = sys.generators[g].p_set;
    x.v[g] = sys.generators[g].v_set;
  }
  return x;
}

// NetworkState ---------------------------------------------------------------

namespace {

// Column of each network coordinate among the power-flow unknowns, -1 when
// the coordinate is fixed by the dispatch or the angle reference.
struct PfLayout {
  std::vector<int> coord_col;  // 2 n_bus
  int qg0 = 0;
  int p_slack = 0;
  int size = 0;

  explicit PfLayout(const PowerSystem& sys) {
    const int n = sys.n_bus();
    const auto gen_at = sys.generator_at_bus();
    coord_col.assign(2 * n, -1);
    int c = 0;
    for (int i = 0; i < n; ++i)
      if (gen_at[i] < 0) coord_col[i] = c++;
    for (int i = 0; i < n; ++i)
      if (i != sys.slack_bus) coord_col[n + i] = c++;
    qg0 = c;
    c += sys.n_gen();
    p_slack = c++;
    size = c;
  }
};

}  // namespace

NetworkState NetworkState::flat(const PowerSystem& sys, const Dispatch& x) {
  NetworkState w;
  w.vm = Vector::Ones(sys.n_bus());
  w.va = Vector::Zero(sys.n_bus());
  w.qg = Vector::Zero(sys.n_gen());
  for (int g = 0; g < sys.n_gen(); ++g) w.vm[sys.generators[g].bus] = x.v[g];
  return w;
}

Vector NetworkState::packed(const PowerSystem& sys) const {
  const PfLayout lay(sys);
  const int n = sys.n_bus();
  Vector out(lay.size);
  for (int c = 0; c < 2 * n; ++c) {
    const int col = lay.coord_col[c];
    if (col >= 0) out[col] = c < n ? vm[c] : va[c - n];
  }
  out.segment(lay.qg0, sys.n_gen()) = qg;
  out[lay.p_slack] = p_slack;
  return out;
}

// Mismatch --------------------------------------------------------------------

namespace {

Vector effective_vm(const PowerSystem& sys, const Dispatch& x, const NetworkState& w) {
  Vector vm = w.vm;
  for (int g = 0; g < sys.n_gen(); ++g) vm[sys.generators[g].bus] = x.v[g];
  return vm;
}

void check_state(const PowerSystem& sys, const Dispatch& x, const NetworkState& w) {
  x.check(sys);
  if (w.vm.size() != sys.n_bus() || w.va.size() != sys.n_bus() || w.qg.size() != sys.n_gen())
    throw DimensionError("network state dimensions do not match the system");
}

}  // namespace

Vector generator_outputs(const PowerSystem& sys, const Dispatch& x, const NetworkState& w) {
  Vector pg(sys.n_gen());
  for (int g = 0; g < sys.n_gen(); ++g) {
    const int i = Dispatch::p_index(sys, g);
    pg[g] = i < 0 ? w.p_slack : x.p[i];
  }
  return pg;
}

double generation_cost(const PowerSystem& sys, const Vector& pg, double cost_scale) {
  double total = 0.0;
  for (int g = 0; g < sys.n_gen(); ++g) total += sys.generators[g].cost.value(pg[g]);
  return cost_scale * total;
}

Vector power_mismatch(const PowerSystem& sys, const Dispatch& x, const NetworkState& w,
                      const AttackVector* y) {
  check_state(sys, x, w);
  const int n = sys.n_bus();
  const NetworkEquations net(sys, branch_scaling(sys, y));
  const Vector pg = generator_outputs(sys, x, w);
  Vector g(2 * n);
  g << -sys.bus_demand_p(), -sys.bus_demand_q();
  for (int k = 0; k < sys.n_gen(); ++k) {
    g[sys.generators[k].bus] += pg[k];
    g[n + sys.generators[k].bus] += w.qg[k];
  }
  g -= net.flows(effective_vm(sys, x, w), w.va);
  return g;
}

Eigen::SparseMatrix<double> mismatch_jacobian(const PowerSystem& sys, const Dispatch& x,
                                              const NetworkState& w, const AttackVector* y) {
  check_state(sys, x, w);
  const int n = sys.n_bus();
  const PfLayout lay(sys);
  const NetworkEquations net(sys, branch_scaling(sys, y));
  std::vector<Triplet> raw;
  net.append_jacobian(effective_vm(sys, x, w), w.va, -1.0, raw);
  std::vector<Triplet> trip;
  trip.reserve(raw.size() + sys.n_gen() + 1);
  for (const auto& t : raw) {
    const int col = lay.coord_col[t.col()];
    if (col >= 0) trip.emplace_back(t.row(), col, t.value());
  }
  for (int g = 0; g < sys.n_gen(); ++g) trip.emplace_back(n + sys.generators[g].bus, lay.qg0 + g, 1.0);
  trip.emplace_back(sys.slack_bus, lay.p_slack, 1.0);
  Eigen::SparseMatrix<double> jac(2 * n, lay.size);
  jac.setFromTriplets(trip.begin(), trip.end());
  return jac;
}

PowerFlowResult solve_power_flow(const PowerSystem& sys, const Dispatch& x, const AttackVector* y,
                                 const PowerFlowOptions& opts) {
  x.check(sys);
  const int n = sys.n_bus();
  const PfLayout lay(sys);

  PowerFlowResult res;
  res.state = opts.warm_start ? *opts.warm_start : NetworkState::flat(sys, x);
  auto& w = res.state;
  check_state(sys, x, w);
  w.vm = effective_vm(sys, x, w);
  w.va[sys.slack_bus] = 0.0;

  std::ofstream trace;
  if (!opts.trace_path.empty()) {
    trace.open(opts.trace_path);
    trace << "iteration,residual\n";
  }

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const Vector f = power_mismatch(sys, x, w, y);
    res.iterations = it;
    res.residual = f.lpNorm<Eigen::Infinity>();
    if (trace.is_open()) trace << it << ',' << res.residual << '\n';
    if (!std::isfinite(res.residual)) break;
    if (res.residual <= opts.tol) {
      res.converged = true;
      break;
    }
    if (it == opts.max_iter) break;

    const auto jac = mismatch_jacobian(sys, x, w, y);
    lu.compute(jac);
    if (lu.info() != Eigen::Success)
      throw SingularMatrixError("power-flow Jacobian is singular (islanded bus or unsupported load)");
    const Vector dx = lu.solve(-f);
    if (!dx.allFinite()) break;

    for (int c = 0; c < 2 * n; ++c) {
      const int col = lay.coord_col[c];
      if (col < 0) continue;
      if (c < n)
        w.vm[c] += dx[col];
      else
        w.va[c - n] += dx[col];
    }
    w.qg += dx.segment(lay.qg0, sys.n_gen());
    w.p_slack += dx[lay.p_slack];
  }
  return res;
}

}  // namespace scopf
