#include "scopf/network.hpp"

#include <cmath>

#include "scopf/errors.hpp"

namespace scopf {

namespace {

// One flow output of the form
//   c_from V_f^2 + c_to V_t^2 + V_f V_t (alpha cos a + beta sin a),  a = th_f - th_t
struct FlowTerm {
  double c_from;
  double c_to;
  double alpha;
  double beta;
};

void evaluate_term(const FlowTerm& t, double vf, double vt, double a, double& value,
                   std::array<double, 4>& grad, std::array<std::array<double, 4>, 4>& hess) {
  const double ca = std::cos(a);
  const double sa = std::sin(a);
  const double c = t.alpha * ca + t.beta * sa;   // angular factor
  const double s = -t.alpha * sa + t.beta * ca;  // its derivative in a
  const double vv = vf * vt;

  value = t.c_from * vf * vf + t.c_to * vt * vt + vv * c;

  grad[0] = 2.0 * t.c_from * vf + vt * c;
  grad[1] = 2.0 * t.c_to * vt + vf * c;
  grad[2] = vv * s;
  grad[3] = -vv * s;

  hess[0][0] = 2.0 * t.c_from;
  hess[1][1] = 2.0 * t.c_to;
  hess[0][1] = hess[1][0] = c;
  hess[0][2] = hess[2][0] = vt * s;
  hess[0][3] = hess[3][0] = -vt * s;
  hess[1][2] = hess[2][1] = vf * s;
  hess[1][3] = hess[3][1] = -vf * s;
  hess[2][2] = hess[3][3] = -vv * c;
  hess[2][3] = hess[3][2] = vv * c;
}

}  // namespace

NetworkEquations::NetworkEquations(const PowerSystem& sys, std::vector<double> branch_scale)
    : sys_(&sys), n_bus_(sys.n_bus()), scale_(std::move(branch_scale)) {
  if (static_cast<int>(scale_.size()) != sys.n_branch())
    throw DimensionError("branch scale vector has wrong length");
  prim_.reserve(sys.branches.size());
  for (const auto& br : sys.branches) {
    const Complex t = std::polar(br.tap, br.shift);
    const Complex ytt = br.series + Complex(0.0, br.charging / 2.0);
    prim_.push_back({ytt / (br.tap * br.tap), -br.series / std::conj(t), -br.series / t, ytt});
  }
}

BranchFlows NetworkEquations::branch_flows(int b, const Vector& vm, const Vector& va) const {
  const auto& br = sys_->branches[b];
  const auto& [yff, yft, ytf, ytt] = prim_[b];
  BranchFlows out;
  out.from = br.from;
  out.to = br.to;
  const std::array<FlowTerm, 4> terms{{
      {yff.real(), 0.0, yft.real(), yft.imag()},     // P_from
      {-yff.imag(), 0.0, -yft.imag(), yft.real()},   // Q_from
      {0.0, ytt.real(), ytf.real(), -ytf.imag()},    // P_to
      {0.0, -ytt.imag(), -ytf.imag(), -ytf.real()},  // Q_to
  }};
  const double a = va[br.from] - va[br.to];
  for (int o = 0; o < 4; ++o)
    evaluate_term(terms[o], vm[br.from], vm[br.to], a, out.value[o], out.grad[o], out.hess[o]);
  return out;
}

Vector NetworkEquations::flows(const Vector& vm, const Vector& va) const {
  const int n = n_bus_;
  Vector f = Vector::Zero(2 * n);
  for (int i = 0; i < n; ++i) {
    const Complex y = sys_->buses[i].shunt;
    f[i] += vm[i] * vm[i] * y.real();
    f[n + i] -= vm[i] * vm[i] * y.imag();
  }
  for (int b = 0; b < sys_->n_branch(); ++b) {
    if (scale_[b] == 0.0) continue;
    const auto bf = branch_flows(b, vm, va);
    for (int o = 0; o < 4; ++o) f[bf.row(o, n)] += scale_[b] * bf.value[o];
  }
  return f;
}

void NetworkEquations::append_jacobian(const Vector& vm, const Vector& va, double sign,
                                       std::vector<Triplet>& out) const {
  const int n = n_bus_;
  for (int i = 0; i < n; ++i) {
    const Complex y = sys_->buses[i].shunt;
    out.emplace_back(i, i, sign * 2.0 * vm[i] * y.real());
    out.emplace_back(n + i, i, -sign * 2.0 * vm[i] * y.imag());
  }
  // Zero-scaled branches still emit entries so the sparsity pattern never
  // depends on the attack.
  for (int b = 0; b < sys_->n_branch(); ++b) {
    const auto bf = branch_flows(b, vm, va);
    const double s = sign * scale_[b];
    for (int o = 0; o < 4; ++o)
      for (int v = 0; v < 4; ++v) out.emplace_back(bf.row(o, n), bf.coord(v, n), s * bf.grad[o][v]);
  }
}

void NetworkEquations::append_weighted_hessian(const Vector& vm, const Vector& va,
                                               const Vector& weights,
                                               std::vector<Triplet>& out) const {
  const int n = n_bus_;
  for (int i = 0; i < n; ++i) {
    const Complex y = sys_->buses[i].shunt;
    out.emplace_back(i, i, 2.0 * (weights[i] * y.real() - weights[n + i] * y.imag()));
  }
  for (int b = 0; b < sys_->n_branch(); ++b) {
    const auto bf = branch_flows(b, vm, va);
    double w[4];
    for (int o = 0; o < 4; ++o) w[o] = scale_[b] * weights[bf.row(o, n)];
    for (int v1 = 0; v1 < 4; ++v1)
      for (int v2 = 0; v2 < 4; ++v2) {
        double h = 0.0;
        for (int o = 0; o < 4; ++o) h += w[o] * bf.hess[o][v1][v2];
        out.emplace_back(bf.coord(v1, n), bf.coord(v2, n), h);
      }
  }
}

}  // namespace scopf
