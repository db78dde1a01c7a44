#pragma once

namespace scopf {

/// Numerical settings shared by every solver in the library.
struct SolverConfig {
  double kkt_tol = 1e-6;       // infinity norm of the KKT residual at the final barrier level
  double pf_tol = 1e-8;        // power-flow mismatch, p.u.
  double barrier_min = 1e-8;   // the barrier schedule stops at the first level below this
  double barrier_init = 0.1;
  double barrier_factor = 0.2;
  int max_newton = 100;
  int max_pf_iter = 50;
  // Objective scaling. Costs enter as cost_scale * $/h (default k$/h) and the
  // infeasibility slack as slack_weight/2 * |s|^2. With cost_scale = 1e-3 the
  // flow duals are O(1), so the slack at a feasible point is O(1/slack_weight).
  double cost_scale = 1e-3;
  double slack_weight = 1e7;
  // Tiny Tikhonov term on bus angles keeps islanded sub-networks well posed.
  // It is not part of any reported loss.
  double angle_reg = 1e-8;
  // Contingency voltage at a generator bus stays within this distance of the
  // dispatched set point.
  double voltage_band = 0.02;
};

}  // namespace scopf
