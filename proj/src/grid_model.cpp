#include "scopf/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "scopf/errors.hpp"

namespace scopf {

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += "; ";
    out += s;
  }
  return out;
}

}  // namespace

SemanticError::SemanticError(const std::vector<std::string>& diagnostics)
    : std::runtime_error("invalid power system: " + join(diagnostics)),
      diagnostics_(diagnostics) {}

int PowerSystem::slack_generator() const {
  for (int g = 0; g < n_gen(); ++g)
    if (generators[g].bus == slack_bus) return g;
  return -1;
}

std::vector<int> PowerSystem::generator_at_bus() const {
  std::vector<int> at(buses.size(), -1);
  for (int g = 0; g < n_gen(); ++g) {
    const int b = generators[g].bus;
    if (b >= 0 && b < n_bus()) at[b] = g;
  }
  return at;
}

std::vector<int> PowerSystem::branch_outage_slot() const {
  std::vector<int> slot(branches.size(), -1);
  for (int j = 0; j < n_outage(); ++j)
    if (outage_devices[j].kind == DeviceKind::branch) slot[outage_devices[j].index] = j;
  return slot;
}

std::vector<int> PowerSystem::generator_outage_slot() const {
  std::vector<int> slot(generators.size(), -1);
  for (int j = 0; j < n_outage(); ++j)
    if (outage_devices[j].kind == DeviceKind::generator) slot[outage_devices[j].index] = j;
  return slot;
}

Vector PowerSystem::bus_demand_p() const {
  Vector d = Vector::Zero(n_bus());
  for (const auto& l : loads) d[l.bus] += l.p;
  return d;
}

Vector PowerSystem::bus_demand_q() const {
  Vector d = Vector::Zero(n_bus());
  for (const auto& l : loads) d[l.bus] += l.q;
  return d;
}

std::string PowerSystem::device_label(int slot) const {
  const auto& dev = outage_devices.at(slot);
  if (dev.kind == DeviceKind::branch) {
    const auto& br = branches[dev.index];
    return "branch " + std::to_string(buses[br.from].id) + "-" + std::to_string(buses[br.to].id);
  }
  return "gen@" + std::to_string(buses[generators[dev.index].bus].id);
}

bool AttackVector::is_valid(double tol) const {
  if (k < 0) return false;
  for (double v : y)
    if (!(v >= -tol && v <= 1.0 + tol)) return false;
  return y.sum() <= k + tol;
}

std::vector<double> branch_scaling(const PowerSystem& sys, const AttackVector* y) {
  std::vector<double> scale(sys.branches.size(), 1.0);
  if (y == nullptr) return scale;
  if (y->y.size() != sys.n_outage())
    throw DimensionError("attack vector length " + std::to_string(y->y.size()) +
                         " != n_outage " + std::to_string(sys.n_outage()));
  for (int j = 0; j < sys.n_outage(); ++j) {
    const auto& dev = sys.outage_devices[j];
    if (dev.kind == DeviceKind::branch) scale[dev.index] = 1.0 - y->y[j];
  }
  return scale;
}

ComplexSparse build_admittance(const PowerSystem& sys, const AttackVector* y) {
  const auto scale = branch_scaling(sys, y);
  const int n = sys.n_bus();
  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(sys.branches.size() * 4 + n);
  for (int i = 0; i < n; ++i) trip.emplace_back(i, i, sys.buses[i].shunt);
  for (int b = 0; b < sys.n_branch(); ++b) {
    const auto& br = sys.branches[b];
    const Complex t = std::polar(br.tap, br.shift);
    const Complex ytt = br.series + Complex(0.0, br.charging / 2.0);
    const Complex yff = ytt / (br.tap * br.tap);
    const Complex yft = -br.series / std::conj(t);
    const Complex ytf = -br.series / t;
    const double s = scale[b];
    trip.emplace_back(br.from, br.from, s * yff);
    trip.emplace_back(br.from, br.to, s * yft);
    trip.emplace_back(br.to, br.from, s * ytf);
    trip.emplace_back(br.to, br.to, s * ytt);
  }
  ComplexSparse ybus(n, n);
  ybus.setFromTriplets(trip.begin(), trip.end());
  return ybus;
}

std::vector<GeneratorLimits> effective_generator_limits(const PowerSystem& sys,
                                                        const AttackVector& y) {
  if (y.y.size() != sys.n_outage()) throw DimensionError("attack vector length mismatch");
  std::vector<GeneratorLimits> lim;
  lim.reserve(sys.generators.size());
  for (const auto& g : sys.generators) lim.push_back({g.p_min, g.p_max, g.q_min, g.q_max});
  for (int j = 0; j < sys.n_outage(); ++j) {
    const auto& dev = sys.outage_devices[j];
    if (dev.kind != DeviceKind::generator) continue;
    const double f = 1.0 - y.y[j];
    auto& l = lim[dev.index];
    l.p_min *= f;
    l.p_max *= f;
    l.q_min *= f;
    l.q_max *= f;
  }
  return lim;
}

std::vector<bool> connected_to_slack(const PowerSystem& sys,
                                     const std::vector<double>& branch_scale) {
  const int n = sys.n_bus();
  std::vector<std::vector<int>> adj(n);
  for (int b = 0; b < sys.n_branch(); ++b) {
    if (branch_scale[b] == 0.0) continue;
    const auto& br = sys.branches[b];
    if (br.from < 0 || br.from >= n || br.to < 0 || br.to >= n) continue;
    adj[br.from].push_back(br.to);
    adj[br.to].push_back(br.from);
  }
  std::vector<bool> seen(n, false);
  if (sys.slack_bus < 0 || sys.slack_bus >= n) return seen;
  std::queue<int> q;
  q.push(sys.slack_bus);
  seen[sys.slack_bus] = true;
  while (!q.empty()) {
    const int i = q.front();
    q.pop();
    for (int j : adj[i])
      if (!seen[j]) {
        seen[j] = true;
        q.push(j);
      }
  }
  return seen;
}

std::vector<std::string> validate_system(const PowerSystem& sys) {
  std::vector<std::string> diag;
  const int n = sys.n_bus();
  auto valid_bus = [n](int b) { return b >= 0 && b < n; };

  if (n == 0) diag.emplace_back("system has no buses");
  if (!(sys.base_mva > 0.0)) diag.emplace_back("base_mva must be positive");

  int n_slack = 0;
  for (const auto& bus : sys.buses) n_slack += bus.kind == BusKind::slack ? 1 : 0;
  if (n > 0 && n_slack != 1)
    diag.push_back("expected exactly one slack bus, found " + std::to_string(n_slack));
  else if (n > 0 && (!valid_bus(sys.slack_bus) || sys.buses[sys.slack_bus].kind != BusKind::slack))
    diag.emplace_back("slack_bus index does not point at the slack bus");

  for (const auto& bus : sys.buses)
    if (!(bus.v_min > 0.0 && bus.v_min < bus.v_max))
      diag.push_back("bus " + std::to_string(bus.id) + ": voltage limits must satisfy 0 < v_min < v_max");

  std::vector<int> gens_at(n, 0);
  for (int g = 0; g < sys.n_gen(); ++g) {
    const auto& gen = sys.generators[g];
    const std::string tag = "generator " + std::to_string(g);
    if (!valid_bus(gen.bus)) {
      diag.push_back(tag + " references nonexistent bus");
      continue;
    }
    if (++gens_at[gen.bus] == 2)
      diag.push_back("bus " + std::to_string(sys.buses[gen.bus].id) +
                     " hosts more than one generator");
    if (gen.p_min > gen.p_max) diag.push_back(tag + ": p_min > p_max");
    if (gen.q_min > gen.q_max) diag.push_back(tag + ": q_min > q_max");
    if (gen.cost.c2 < 0.0) diag.push_back(tag + ": negative quadratic cost coefficient");
    if (!(gen.ramp > 0.0 && gen.ramp <= 1.0)) diag.push_back(tag + ": ramp fraction outside (0, 1]");
  }
  if (n > 0 && valid_bus(sys.slack_bus) && sys.slack_generator() < 0)
    diag.emplace_back("slack bus has no generator");

  for (std::size_t l = 0; l < sys.loads.size(); ++l) {
    const auto& load = sys.loads[l];
    if (!valid_bus(load.bus)) diag.push_back("load " + std::to_string(l) + " references nonexistent bus");
    if (!std::isfinite(load.p) || !std::isfinite(load.q))
      diag.push_back("load " + std::to_string(l) + " has non-finite demand");
  }

  bool branches_ok = true;
  for (int b = 0; b < sys.n_branch(); ++b) {
    const auto& br = sys.branches[b];
    const std::string tag = "branch " + std::to_string(b);
    if (!valid_bus(br.from) || !valid_bus(br.to)) {
      diag.push_back(tag + " references nonexistent bus");
      branches_ok = false;
    }
    if (br.series == Complex(0.0, 0.0)) diag.push_back(tag + ": zero series admittance");
    if (!(br.tap > 0.0)) diag.push_back(tag + ": tap ratio must be positive");
  }

  std::set<std::pair<int, int>> seen;
  for (const auto& dev : sys.outage_devices) {
    const int count = dev.kind == DeviceKind::branch ? sys.n_branch() : sys.n_gen();
    if (dev.index < 0 || dev.index >= count) {
      diag.emplace_back("outage device references nonexistent element");
      continue;
    }
    if (!seen.insert({static_cast<int>(dev.kind), dev.index}).second)
      diag.emplace_back("outage device listed more than once");
  }
  for (int b = 0; b < sys.n_branch(); ++b) {
    const bool listed = seen.count({static_cast<int>(DeviceKind::branch), b}) > 0;
    if (listed != sys.branches[b].outage_eligible)
      diag.push_back("branch " + std::to_string(b) + ": outage flag disagrees with outage list");
  }

  if (n > 0 && branches_ok && valid_bus(sys.slack_bus)) {
    const auto reach = connected_to_slack(sys, std::vector<double>(sys.branches.size(), 1.0));
    for (int i = 0; i < n; ++i)
      if (!reach[i])
        diag.push_back("bus " + std::to_string(sys.buses[i].id) + " is not connected to the slack bus");
  }
  return diag;
}

PowerSystem load_case_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open case file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  auto sys = parse_case(buf.str());
  if (sys.name.empty()) sys.name = path;
  return sys;
}

}  // namespace scopf
