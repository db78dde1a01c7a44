#pragma once

#include <array>
#include <vector>

#include <Eigen/SparseCore>

#include "scopf/grid_model.hpp"

namespace scopf {

using Triplet = Eigen::Triplet<double>;

/// Flows of one branch in polar coordinates. Outputs are ordered
/// (P_from, Q_from, P_to, Q_to); local variables (V_from, V_to, th_from, th_to).
struct BranchFlows {
  int from = 0;
  int to = 0;
  std::array<double, 4> value{};
  std::array<std::array<double, 4>, 4> grad{};                        // [output][var]
  std::array<std::array<std::array<double, 4>, 4>, 4> hess{};         // [output][var][var]

  /// Network coordinate of a local variable (see NetworkEquations).
  [[nodiscard]] int coord(int var, int n_bus) const {
    switch (var) {
      case 0: return from;
      case 1: return to;
      case 2: return n_bus + from;
      default: return n_bus + to;
    }
  }
  /// Residual row touched by an output.
  [[nodiscard]] int row(int out, int n_bus) const {
    switch (out) {
      case 0: return from;
      case 1: return n_bus + from;
      case 2: return to;
      default: return n_bus + to;
    }
  }
};

/// Real/reactive power leaving every bus through branches and shunts,
/// with each branch scaled by a per-branch admittance factor.
///
/// Network coordinates: vm_i -> i, va_i -> n_bus + i. Rows: P_i -> i,
/// Q_i -> n_bus + i.
class NetworkEquations {
 public:
  NetworkEquations(const PowerSystem& sys, std::vector<double> branch_scale);

  [[nodiscard]] int n_bus() const { return n_bus_; }
  [[nodiscard]] const std::vector<double>& branch_scale() const { return scale_; }

  /// Unscaled flows of branch b.
  [[nodiscard]] BranchFlows branch_flows(int b, const Vector& vm, const Vector& va) const;

  /// [P; Q] leaving each bus, length 2 n_bus.
  [[nodiscard]] Vector flows(const Vector& vm, const Vector& va) const;

  /// Appends d[P;Q]/d(coords) entries, multiplied by `sign`.
  void append_jacobian(const Vector& vm, const Vector& va, double sign,
                       std::vector<Triplet>& out) const;

  /// Appends the Hessian of weights' * [P;Q] with respect to the coordinates.
  void append_weighted_hessian(const Vector& vm, const Vector& va, const Vector& weights,
                               std::vector<Triplet>& out) const;

 private:
  const PowerSystem* sys_;
  int n_bus_;
  std::vector<double> scale_;
  std::vector<std::array<Complex, 4>> prim_;  // yff, yft, ytf, ytt
};

}  // namespace scopf
