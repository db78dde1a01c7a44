#include "scopf/interior_point.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scopf/errors.hpp"
#include "scopf/instrumentation.hpp"

namespace scopf {

namespace {

constexpr double kInfiniteBound = 1e10;

Vector full_angles(const FlowLayout& lay, const Vector& u) {
  Vector va = Vector::Zero(lay.n_bus);
  for (int i = 0; i < lay.n_bus; ++i)
    if (lay.va(i) >= 0) va[i] = u[lay.va(i)];
  return va;
}

}  // namespace

FlowLayout::FlowLayout(const PowerSystem& sys, bool slack)
    : n_bus(sys.n_bus()), n_gen(sys.n_gen()), with_slack(slack) {
  pg0 = 0;
  qg0 = n_gen;
  vm0 = 2 * n_gen;
  va0 = vm0 + n_bus;
  va_index.assign(n_bus, -1);
  int c = va0;
  for (int i = 0; i < n_bus; ++i)
    if (i != sys.slack_bus) va_index[i] = c++;
  if (with_slack) {
    s0 = c;
    c += 2 * n_bus;
  }
  size = c;
}

FlowProblem::FlowProblem(const PowerSystem& system, bool with_slack,
                         std::vector<double> scale, const SolverConfig& cfg)
    : sys(&system),
      layout(system, with_slack),
      branch_scale(scale),
      pd(system.bus_demand_p()),
      qd(system.bus_demand_q()),
      cost_scale(cfg.cost_scale),
      slack_weight(cfg.slack_weight),
      angle_reg(cfg.angle_reg),
      net(system, std::move(scale)) {}

void FlowProblem::add_box(int var, double lo, double hi) {
  if (lo > -kInfiniteBound) bounds.push_back({var, -1.0, lo});
  if (hi < kInfiniteBound) bounds.push_back({var, 1.0, hi});
}

double FlowProblem::loss(const Vector& u) const {
  double f = 0.0;
  for (int g = 0; g < layout.n_gen; ++g) f += sys->generators[g].cost.value(u[layout.pg(g)]);
  f *= cost_scale;
  if (layout.with_slack) f += 0.5 * slack_weight * u.segment(layout.s0, n_eq()).squaredNorm();
  return f;
}

Vector FlowProblem::constraints(const Vector& u) const {
  const int n = layout.n_bus;
  Vector g(2 * n);
  g << -pd, -qd;
  for (int k = 0; k < layout.n_gen; ++k) {
    g[sys->generators[k].bus] += u[layout.pg(k)];
    g[n + sys->generators[k].bus] += u[layout.qg(k)];
  }
  g -= net.flows(u.segment(layout.vm0, n), full_angles(layout, u));
  if (layout.with_slack) g += u.segment(layout.s0, 2 * n);
  return g;
}

Vector KktPoint::stacked() const {
  Vector out(u.size() + lambda.size() + mu.size());
  out << u, lambda, mu;
  return out;
}

Vector kkt_residual(const FlowProblem& prob, const KktPoint& pt) {
  const auto& lay = prob.layout;
  const int n = lay.n_bus;
  const int nu = prob.n_primal();
  const int m = prob.n_eq();
  const auto& u = pt.u;
  const auto& lam = pt.lambda;
  Vector f = Vector::Zero(prob.dim());

  // Stationarity.
  for (int g = 0; g < lay.n_gen; ++g) {
    const int bus = prob.sys->generators[g].bus;
    f[lay.pg(g)] += prob.cost_scale * prob.sys->generators[g].cost.slope(u[lay.pg(g)]) + lam[bus];
    f[lay.qg(g)] += lam[n + bus];
  }
  for (int i = 0; i < n; ++i)
    if (lay.va(i) >= 0) f[lay.va(i)] += prob.angle_reg * u[lay.va(i)];
  if (lay.with_slack)
    for (int r = 0; r < m; ++r) f[lay.s(r)] += prob.slack_weight * u[lay.s(r)] + lam[r];

  const Vector vm = u.segment(lay.vm0, n);
  const Vector va = full_angles(lay, u);
  std::vector<Triplet> jac;
  prob.net.append_jacobian(vm, va, -1.0, jac);
  for (const auto& t : jac) {
    const int var = lay.coord(t.col());
    if (var >= 0) f[var] += t.value() * lam[t.row()];
  }
  for (int k = 0; k < prob.n_ineq(); ++k) {
    const auto& b = prob.bounds[k];
    f[b.var] += pt.mu[k] * b.sign;
  }
  if (prob.linear.size() == nu) f.head(nu) += prob.linear;

  // Flow equations.
  f.segment(nu, m) = prob.constraints(u);

  // Relaxed complementarity.
  for (int k = 0; k < prob.n_ineq(); ++k)
    f[nu + m + k] = pt.mu[k] * prob.bounds[k].h(u) + pt.eps;
  return f;
}

SparseMatrix kkt_jacobian(const FlowProblem& prob, const KktPoint& pt) {
  const auto& lay = prob.layout;
  const int n = lay.n_bus;
  const int nu = prob.n_primal();
  const int m = prob.n_eq();
  const auto& u = pt.u;
  std::vector<Triplet> trip;

  // Hessian of the Lagrangian.
  for (int g = 0; g < lay.n_gen; ++g)
    trip.emplace_back(lay.pg(g), lay.pg(g), 2.0 * prob.cost_scale * prob.sys->generators[g].cost.c2);
  for (int i = 0; i < n; ++i)
    if (lay.va(i) >= 0) trip.emplace_back(lay.va(i), lay.va(i), prob.angle_reg);
  if (lay.with_slack)
    for (int r = 0; r < m; ++r) trip.emplace_back(lay.s(r), lay.s(r), prob.slack_weight);

  const Vector vm = u.segment(lay.vm0, n);
  const Vector va = full_angles(lay, u);
  std::vector<Triplet> net;
  prob.net.append_weighted_hessian(vm, va, pt.lambda, net);
  for (const auto& t : net) {
    const int r = lay.coord(t.row());
    const int c = lay.coord(t.col());
    if (r >= 0 && c >= 0) trip.emplace_back(r, c, -t.value());
  }

  // Constraint Jacobian and its transpose.
  auto add_ag = [&](int row, int var, double v) {
    trip.emplace_back(nu + row, var, v);
    trip.emplace_back(var, nu + row, v);
  };
  for (int g = 0; g < lay.n_gen; ++g) {
    const int bus = prob.sys->generators[g].bus;
    add_ag(bus, lay.pg(g), 1.0);
    add_ag(n + bus, lay.qg(g), 1.0);
  }
  if (lay.with_slack)
    for (int r = 0; r < m; ++r) add_ag(r, lay.s(r), 1.0);
  net.clear();
  prob.net.append_jacobian(vm, va, -1.0, net);
  for (const auto& t : net) {
    const int var = lay.coord(t.col());
    if (var >= 0) add_ag(t.row(), var, t.value());
  }

  // Bounds.
  for (int k = 0; k < prob.n_ineq(); ++k) {
    const auto& b = prob.bounds[k];
    const int row = nu + m + k;
    trip.emplace_back(b.var, row, b.sign);
    trip.emplace_back(row, b.var, pt.mu[k] * b.sign);
    trip.emplace_back(row, row, b.h(u));
  }

  SparseMatrix jac(prob.dim(), prob.dim());
  jac.setFromTriplets(trip.begin(), trip.end());
  return jac;
}

KktFactorization::KktFactorization(const SparseMatrix& jac) : dim_(static_cast<int>(jac.rows())) {
  ++counters().kkt_factorizations;
  lu_.compute(jac);
  if (lu_.info() != Eigen::Success)
    throw SingularMatrixError("KKT Jacobian is numerically singular: " + lu_.lastErrorMessage());
}

Vector KktFactorization::solve(const Vector& rhs) const {
  if (rhs.size() != dim_) throw DimensionError("KKT right-hand side has wrong length");
  ++counters().kkt_solves;
  return lu_.solve(rhs);
}

Vector KktFactorization::solve_transpose(const Vector& rhs) const {
  if (rhs.size() != dim_) throw DimensionError("KKT right-hand side has wrong length");
  ++counters().kkt_transpose_solves;
  return lu_.transpose().solve(rhs);
}

IpOptions IpOptions::from(const SolverConfig& cfg) {
  IpOptions o;
  o.kkt_tol = cfg.kkt_tol;
  o.barrier_init = cfg.barrier_init;
  o.barrier_factor = cfg.barrier_factor;
  o.barrier_min = cfg.barrier_min;
  o.max_newton = cfg.max_newton;
  return o;
}

double final_barrier(const IpOptions& opts) {
  double eps = opts.barrier_init;
  while (eps > opts.barrier_min) eps *= opts.barrier_factor;
  return eps;
}

void push_inside_bounds(const FlowProblem& prob, Vector& u, double kappa) {
  const int nu = prob.n_primal();
  Vector lo = Vector::Constant(nu, -std::numeric_limits<double>::infinity());
  Vector hi = Vector::Constant(nu, std::numeric_limits<double>::infinity());
  for (const auto& b : prob.bounds) {
    if (b.sign < 0)
      lo[b.var] = std::max(lo[b.var], b.value);
    else
      hi[b.var] = std::min(hi[b.var], b.value);
  }
  for (int i = 0; i < nu; ++i) {
    const bool has_lo = std::isfinite(lo[i]);
    const bool has_hi = std::isfinite(hi[i]);
    if (has_lo && has_hi) {
      const double width = hi[i] - lo[i];
      if (!(width > 0.0)) throw ContractViolation("empty bound interval");
      const double push_lo = std::min(kappa * std::max(1.0, std::abs(lo[i])), kappa * width);
      const double push_hi = std::min(kappa * std::max(1.0, std::abs(hi[i])), kappa * width);
      u[i] = std::clamp(u[i], lo[i] + push_lo, hi[i] - push_hi);
    } else if (has_lo) {
      u[i] = std::max(u[i], lo[i] + kappa * std::max(1.0, std::abs(lo[i])));
    } else if (has_hi) {
      u[i] = std::min(u[i], hi[i] - kappa * std::max(1.0, std::abs(hi[i])));
    }
  }
}

IpResult solve_interior_point(const FlowProblem& prob, Vector u0, const IpOptions& opts,
                              const Vector* lambda0) {
  if (u0.size() != prob.n_primal()) throw DimensionError("initial point has wrong length");
  const int nu = prob.n_primal();
  const int m = prob.n_eq();
  const int nb = prob.n_ineq();

  IpResult res;
  KktPoint& pt = res.point;
  push_inside_bounds(prob, u0, opts.bound_push);
  pt.u = std::move(u0);
  pt.lambda = lambda0 != nullptr ? *lambda0 : Vector::Zero(m);
  pt.mu = Vector::Ones(nb);
  pt.eps = opts.barrier_init;

  auto final_level = [&] { return pt.eps <= opts.barrier_min; };

  Vector f = kkt_residual(prob, pt);
  double r = f.lpNorm<Eigen::Infinity>();
  bool polish = false;
  for (int it = 1;; ++it) {
    // Advance the barrier while the current level is solved.
    while (!final_level() && r <= std::max(10.0 * pt.eps, opts.kkt_tol)) {
      pt.eps *= opts.barrier_factor;
      f = kkt_residual(prob, pt);
      r = f.lpNorm<Eigen::Infinity>();
    }
    res.residual_history.push_back(r);
    res.barrier_history.push_back(pt.eps);
    if (!std::isfinite(r))
      throw ConvergenceError("interior point produced a non-finite residual", res.residual_history);
    polish = final_level() && r <= opts.kkt_tol;
    if (it > opts.max_newton)
      throw ConvergenceError("interior point did not converge in " +
                                 std::to_string(opts.max_newton) + " Newton iterations",
                             res.residual_history);

    auto fact = std::make_shared<const KktFactorization>(kkt_jacobian(prob, pt));
    const Vector rhs = -f;
    const Vector d = fact->solve(rhs);
    if (!d.allFinite())
      throw SingularMatrixError("KKT Newton step is not finite");

    // Fraction to the boundary.
    double ap = 1.0;
    double ad = 1.0;
    for (int k = 0; k < nb; ++k) {
      const auto& b = prob.bounds[k];
      const double dh = b.sign * d[b.var];
      if (dh > 0.0) ap = std::min(ap, -opts.tau * b.h(pt.u) / dh);
      const double dmu = d[nu + m + k];
      if (dmu < 0.0) ad = std::min(ad, -opts.tau * pt.mu[k] / dmu);
    }
    pt.u += ap * d.head(nu);
    pt.lambda += ad * d.segment(nu, m);
    pt.mu += ad * d.tail(nb);
    res.iterations = it;

    f = kkt_residual(prob, pt);
    r = f.lpNorm<Eigen::Infinity>();
    // The polishing step must itself land within tolerance; a step that
    // overshoots on complementarity sends the loop back to plain Newton.
    if (polish && r <= opts.kkt_tol) {
      res.factorization = std::move(fact);
      res.rhs = rhs;
      res.residual = r;
      res.residual_history.push_back(r);
      res.barrier_history.push_back(pt.eps);
      res.converged = true;
      return res;
    }
  }
}

}  // namespace scopf
