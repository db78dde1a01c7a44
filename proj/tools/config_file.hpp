#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "scopf/driver.hpp"

namespace scopf::cli {

/// Run configuration read from JSON. Sections mirror ScopfConfig:
///   k, seed, warm_start,
///   attack {step_size, max_iters, tolerance, init, backtracking, max_backtracks, failure_retries},
///   defense {base_tol, damping, max_retries, loss_backtracks, max_stalls},
///   outer {max_outer, loss_tol, window, dispatch_tol},
///   solver {kkt_tol, pf_tol, barrier_min, barrier_init, barrier_factor, max_newton,
///           max_pf_iter, cost_scale, slack_weight, angle_reg, voltage_band}.
/// Every key is optional and defaults to the library value.
struct RunConfig {
  ScopfConfig scopf;
  std::uint64_t seed = 0;
};

/// Collects every unknown key, type error and invalid value, then throws a
/// single ParseError listing all of them.
RunConfig parse_run_config(const nlohmann::ordered_json& j);
RunConfig parse_run_config_text(const std::string& text);
RunConfig load_run_config(const std::string& path);

/// The effective configuration with every field filled in.
nlohmann::ordered_json run_config_json(const RunConfig& cfg);

}  // namespace scopf::cli
