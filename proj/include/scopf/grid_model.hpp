#pragma once

#include <complex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace scopf {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXd;
using ComplexSparse = Eigen::SparseMatrix<Complex>;

enum class BusKind { pq, pv, slack };

struct Bus {
  int id = 0;  // external bus number from the case file
  BusKind kind = BusKind::pq;
  double v_min = 0.94;
  double v_max = 1.06;
  Complex shunt{0.0, 0.0};  // G + jB at 1 p.u. voltage
};

/// Quadratic cost in $/h with real power in p.u.: c2 p^2 + c1 p + c0.
struct QuadraticCost {
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;

  [[nodiscard]] double value(double p) const { return (c2 * p + c1) * p + c0; }
  [[nodiscard]] double slope(double p) const { return 2.0 * c2 * p + c1; }
};

struct Generator {
  int bus = 0;  // index into PowerSystem::buses
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  QuadraticCost cost;
  double ramp = 0.1;  // fraction of p_max allowed between base and contingency
  double p_set = 0.0;  // nominal setpoints from the case file
  double v_set = 1.0;
};

struct Branch {
  int from = 0;  // bus indices
  int to = 0;
  Complex series{0.0, 0.0};  // 1 / (r + jx)
  double charging = 0.0;     // total line-charging susceptance
  double tap = 1.0;
  double shift = 0.0;  // radians
  bool outage_eligible = true;
};

struct Load {
  int bus = 0;
  double p = 0.0;
  double q = 0.0;
};

enum class DeviceKind { branch, generator };

struct DeviceRef {
  DeviceKind kind = DeviceKind::branch;
  int index = 0;

  friend bool operator==(const DeviceRef&, const DeviceRef&) = default;
};

/// Static grid description in per-unit on `base_mva`. Treated as immutable
/// once built; solvers only ever take it by const reference.
struct PowerSystem {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Generator> generators;
  std::vector<Branch> branches;
  std::vector<Load> loads;
  int slack_bus = 0;
  std::vector<DeviceRef> outage_devices;

  [[nodiscard]] int n_bus() const { return static_cast<int>(buses.size()); }
  [[nodiscard]] int n_gen() const { return static_cast<int>(generators.size()); }
  [[nodiscard]] int n_branch() const { return static_cast<int>(branches.size()); }
  [[nodiscard]] int n_outage() const { return static_cast<int>(outage_devices.size()); }

  /// Index of the generator at the slack bus, -1 if none.
  [[nodiscard]] int slack_generator() const;
  /// Generator index at each bus, -1 where there is none.
  [[nodiscard]] std::vector<int> generator_at_bus() const;
  /// Position of each branch / generator in outage_devices, -1 if not eligible.
  [[nodiscard]] std::vector<int> branch_outage_slot() const;
  [[nodiscard]] std::vector<int> generator_outage_slot() const;
  /// Net real and reactive demand per bus.
  [[nodiscard]] Vector bus_demand_p() const;
  [[nodiscard]] Vector bus_demand_q() const;
  [[nodiscard]] std::string device_label(int slot) const;
};

/// Relaxed contingency: y_j in [0, 1] with sum(y) <= k.
struct AttackVector {
  Vector y;
  int k = 1;

  [[nodiscard]] bool is_valid(double tol = 1e-10) const;
  static AttackVector zeros(int n_outage, int k) { return {Vector::Zero(n_outage), k}; }
};

// Case files ---------------------------------------------------------------

/// Parse MATPOWER-style case text (sections mpc.baseMVA, mpc.bus, mpc.gen,
/// mpc.branch, mpc.gencost; optional mpc.ramp and mpc.outage). Throws
/// ParseError on syntax problems and SemanticError on invariant violations.
PowerSystem parse_case(std::string_view text);
PowerSystem load_case_file(const std::string& path);

/// Per-branch admittance multiplier (1 - y_j) for outage-eligible branches,
/// 1 elsewhere.
std::vector<double> branch_scaling(const PowerSystem& sys, const AttackVector* y);

/// Bus admittance matrix with eligible branch j scaled by (1 - y_j).
ComplexSparse build_admittance(const PowerSystem& sys, const AttackVector* y = nullptr);

struct GeneratorLimits {
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
};

/// Generator limits with eligible generator j scaled by (1 - y_j).
std::vector<GeneratorLimits> effective_generator_limits(const PowerSystem& sys,
                                                        const AttackVector& y);

/// One message per violated invariant; empty when the system is valid.
std::vector<std::string> validate_system(const PowerSystem& sys);

/// Buses reachable from the slack bus through branches with nonzero scaling.
std::vector<bool> connected_to_slack(const PowerSystem& sys,
                                     const std::vector<double>& branch_scale);

}  // namespace scopf
