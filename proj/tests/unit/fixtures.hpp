#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "scopf/grid_model.hpp"
#include "scopf/powerflow.hpp"

namespace scopf::test {

inline std::string data_path(const std::string& name) {
  return std::string(SCOPF_DATA_DIR) + "/" + name;
}

inline const PowerSystem& case14() {
  static const PowerSystem sys = load_case_file(data_path("case14.m"));
  return sys;
}

inline const PowerSystem& case118() {
  static const PowerSystem sys = load_case_file(data_path("case118.m"));
  return sys;
}

inline const BaseOpfResult& case14_opf() {
  static const BaseOpfResult opf = solve_base_opf(case14());
  return opf;
}

// Outage slot of the branch between two external bus ids.
inline int branch_slot(const PowerSystem& sys, int from_id, int to_id) {
  const auto slots = sys.branch_outage_slot();
  for (int b = 0; b < sys.n_branch(); ++b) {
    const int f = sys.buses[sys.branches[b].from].id;
    const int t = sys.buses[sys.branches[b].to].id;
    if ((f == from_id && t == to_id) || (f == to_id && t == from_id)) return slots[b];
  }
  return -1;
}

inline int generator_slot(const PowerSystem& sys, int bus_id) {
  const auto slots = sys.generator_outage_slot();
  for (int g = 0; g < sys.n_gen(); ++g)
    if (sys.buses[sys.generators[g].bus].id == bus_id) return slots[g];
  return -1;
}

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct BusSpec {
  int type = 1;
  double pd = 0.0, qd = 0.0;  // MW, MVAr
  double vmax = 1.1, vmin = 0.9;
};
struct GenSpec {
  int bus = 1;
  double pg = 0.0, vg = 1.0;
  double qmax = 100.0, qmin = -100.0, pmax = 100.0, pmin = 0.0;
  double c2 = 0.01, c1 = 10.0, c0 = 0.0;  // $/MW^2h, $/MWh, $/h
};
struct BranchSpec {
  int from = 1, to = 2;
  double r = 0.0, x = 0.1, b = 0.0;
};

// MATPOWER-style text for a small hand-built case; bus ids are 1..n.
inline std::string case_text(const std::vector<BusSpec>& buses, const std::vector<GenSpec>& gens,
                             const std::vector<BranchSpec>& branches, const std::string& extra = "") {
  std::string t = "function mpc = handmade\nmpc.baseMVA = 100;\nmpc.bus = [\n";
  for (std::size_t i = 0; i < buses.size(); ++i) {
    const auto& b = buses[i];
    t += std::to_string(i + 1) + " " + std::to_string(b.type) + " " + num(b.pd) + " " + num(b.qd) +
         " 0 0 1 1 0 100 1 " + num(b.vmax) + " " + num(b.vmin) + ";\n";
  }
  t += "];\nmpc.gen = [\n";
  for (const auto& g : gens)
    t += std::to_string(g.bus) + " " + num(g.pg) + " 0 " + num(g.qmax) + " " + num(g.qmin) + " " +
         num(g.vg) + " 100 1 " + num(g.pmax) + " " + num(g.pmin) + ";\n";
  t += "];\nmpc.branch = [\n";
  for (const auto& br : branches)
    t += std::to_string(br.from) + " " + std::to_string(br.to) + " " + num(br.r) + " " + num(br.x) +
         " " + num(br.b) + " 0 0 0 0 0 1 -360 360;\n";
  t += "];\nmpc.gencost = [\n";
  for (const auto& g : gens) t += "2 0 0 3 " + num(g.c2) + " " + num(g.c1) + " " + num(g.c0) + ";\n";
  t += "];\n" + extra;
  return t;
}

// Slack bus 1 with one generator, bus 2 carrying the load.
inline PowerSystem two_bus(double pd_mw, double qd_mvar, double x = 0.1, double r = 0.0,
                           double pmax = 300.0) {
  GenSpec g;
  g.pmax = pmax;
  g.qmax = 300.0;
  g.qmin = -300.0;
  return parse_case(case_text({{3}, {1, pd_mw, qd_mvar}}, {g}, {{1, 2, r, x, 0.0}}));
}

// Temporary directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("scopf_test_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  [[nodiscard]] std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace scopf::test
