// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Criterion numbers given as arguments
// restrict the run to those criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "config_file.hpp"
#include "fixtures.hpp"
#include "projection_oracle.hpp"
#include "scopf/attack.hpp"
#include "scopf/defense.hpp"
#include "scopf/driver.hpp"
#include "scopf/evaluation.hpp"
#include "scopf/implicit_grad.hpp"
#include "scopf/instrumentation.hpp"

using namespace scopf;
using scopf::test::case118;
using scopf::test::case14;
using scopf::test::case14_opf;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

const std::string kConfigK2 = std::string(SCOPF_CONFIG_DIR) + "/case14_k2.json";

const ScopfResult& run14_k2() {
  static const ScopfResult r = run_scopf(case14(), cli::load_run_config(kConfigK2).scopf);
  return r;
}

// Dispatch box corners, from clipping far-away points.
std::pair<Vector, Vector> dispatch_box(const PowerSystem& sys) {
  const int n = 2 * sys.n_gen() - 1;
  return {project_dispatch(sys, Dispatch::from_flat(sys, Vector::Constant(n, -1e9))).flat(),
          project_dispatch(sys, Dispatch::from_flat(sys, Vector::Constant(n, 1e9))).flat()};
}

// Base optimum moved by up to 5% of each box width, kept 1% inside the box,
// redrawn until the base power flow converges.
Dispatch random_interior_dispatch(const PowerSystem& sys, const Dispatch& center, std::mt19937_64& rng) {
  const auto [lo, hi] = dispatch_box(sys);
  for (;;) {
    Vector v = center.flat();
    for (int i = 0; i < v.size(); ++i) {
      const double width = hi[i] - lo[i];
      v[i] += 0.05 * width * (2.0 * uniform01(rng()) - 1.0);
      v[i] = std::clamp(v[i], lo[i] + 0.01 * width, hi[i] - 0.01 * width);
    }
    const Dispatch x = Dispatch::from_flat(sys, v);
    try {
      if (solve_power_flow(sys, x).converged) return x;
    } catch (const std::exception&) {
    }
  }
}

// Every coordinate in [0.01, 0.1], redrawn until the budget has 0.05 to spare.
AttackVector random_interior_attack(const PowerSystem& sys, int k, std::mt19937_64& rng) {
  for (;;) {
    auto y = AttackVector::zeros(sys.n_outage(), k);
    for (int j = 0; j < y.y.size(); ++j) y.y[j] = 0.01 + 0.09 * uniform01(rng());
    if (y.y.sum() <= k - 0.05) return y;
  }
}

Verdict criterion_1() {
  const auto start = Clock::now();
  const auto& sys = case14();
  SolverConfig tight;
  tight.kkt_tol = 1e-8;
  std::mt19937_64 rng(101);
  const double h = 1e-5;
  double worst = 0.0;
  int compared = 0;
  for (int pair = 0; pair < 10; ++pair) {
    const Dispatch x = random_interior_dispatch(sys, case14_opf().x, rng);
    const AttackVector y = random_interior_attack(sys, 2, rng);
    const auto sol = solve_third_stage(sys, x, y, tight);
    const Vector g = attack_gradient(sys, x, y, sol).total;
    const Vector fd = finite_diff_gradient(sys, x, y, h, tight).grad;
    for (int j = 0; j < g.size(); ++j) {
      if (std::abs(g[j]) <= 1e-6) continue;
      worst = std::max(worst, std::abs(g[j] - fd[j]) / std::abs(fd[j]));
      ++compared;
    }
  }
  const double t = seconds_since(start);
  return {worst < 1e-3 && t < 300.0,
          fmt("max relative error %.3g over %d coordinates, %.1f s", worst, compared, t)};
}

Verdict criterion_2() {
  const auto start = Clock::now();
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 8;
    const int k = 1 + trial % 3;
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = -1.0 + 3.0 * uniform01(rng());
    const Vector ref = scopf::test::brute_force_projection(v, k);
    worst = std::max(worst, (project_attack(v, k).y - ref).lpNorm<Eigen::Infinity>());
  }
  const double t = seconds_since(start);
  return {worst <= 1e-6 && t < 60.0, fmt("max deviation %.3g on 100 vectors, %.2f s", worst, t)};
}

Verdict criterion_3() {
  const auto& sys = case14();
  const auto& opf = case14_opf();
  int converged = 0, failed = 0, bad = 0;
  double worst_res = 0.0, worst_gap_ratio = 0.0;
  auto check = [&](const Dispatch& x, const AttackVector& y) {
    ThirdStageSolution sol;
    try {
      sol = solve_third_stage(sys, x, y);
    } catch (const std::exception&) {
      ++failed;
      return;
    }
    if (!sol.converged) {
      ++failed;
      return;
    }
    ++converged;
    const double res = kkt_residual(sys, x, y, sol);
    const double gap_ratio = complementarity_gap(sys, sol) / (sol.problem->n_ineq() * 1e-8);
    worst_res = std::max(worst_res, res);
    worst_gap_ratio = std::max(worst_gap_ratio, gap_ratio);
    if (res > 1e-6 || gap_ratio > 1.0) ++bad;
  };

  std::mt19937_64 rng(303);
  for (int j = 0; j < sys.n_outage(); ++j) {
    auto y = AttackVector::zeros(sys.n_outage(), 2);
    y.y[j] = 1.0;
    check(opf.x, y);
  }
  for (const auto& s : sample_contingencies(sys, 2, 20, 303)) {
    auto y = AttackVector::zeros(sys.n_outage(), 2);
    for (int j : s.devices) y.y[j] = 1.0;
    check(opf.x, y);
  }
  for (int i = 0; i < 20; ++i) {
    const Dispatch x = i % 2 == 0 ? opf.x : random_interior_dispatch(sys, opf.x, rng);
    check(x, random_interior_attack(sys, 2, rng));
  }

  const auto y0 = AttackVector::zeros(sys.n_outage(), 2);
  check(opf.x, y0);
  const auto sol0 = solve_third_stage(sys, opf.x, y0);
  const double s0 = sol0.s.lpNorm<Eigen::Infinity>();
  const double dz = (sol0.z.flat() - opf.x.flat()).lpNorm<Eigen::Infinity>();

  const bool pass = bad == 0 && converged > 0 && s0 <= 1e-6 && dz <= 1e-5;
  return {pass, fmt("%d converged solves (%d not converged), %d out of tolerance, max residual "
                    "%.3g, max gap / (n_ineq 1e-8) %.3g; y = 0: |s|inf %.3g, |z - x|inf %.3g",
                    converged, failed, bad, worst_res, worst_gap_ratio, s0, dz)};
}

Verdict criterion_4() {
  const auto start = Clock::now();
  const auto& sys = case14();
  const auto& opf = case14_opf();
  const double base =
      solve_third_stage(sys, opf.x, AttackVector::zeros(sys.n_outage(), 2)).attack_loss(sys);
  const auto res = find_worst_case_attack(sys, opf.x, 2, AttackConfig{});
  const double gain = res.loss / base - 1.0;
  const auto iters = res.trace.iterations.size();
  const double t = seconds_since(start);
  return {gain >= 0.01 && iters <= 10 && t < 300.0,
          fmt("loss %.6g vs %.6g at y = 0 (+%.2f%%) after %zu iterations, %.1f s", res.loss, base,
              100.0 * gain, iters, t)};
}

struct DefenseTally {
  int records = 0, decreases = 0, accepted = 0, pf_bad = 0;
};

DefenseTally tally_defense(const ScopfResult& r) {
  DefenseTally t;
  for (const auto& rec : r.history.records) {
    ++t.records;
    if (rec.post.total < rec.pre.total) ++t.decreases;
    if (rec.damping > 0.0) {
      ++t.accepted;
      const auto pf = solve_power_flow(case14(), rec.x);
      if (rec.base_pf_residual > 1e-6 || !pf.converged || pf.residual > 1e-6) ++t.pf_bad;
    }
  }
  return t;
}

Verdict criterion_5() {
  const auto t = tally_defense(run14_k2());
  std::string info;
  for (int k : {1, 3}) {
    const auto cfg = cli::load_run_config(std::string(SCOPF_CONFIG_DIR) + "/case14_k" +
                                     std::to_string(k) + ".json");
    const auto other = tally_defense(run_scopf(case14(), cfg.scopf));
    info += fmt("; k = %d: %d/%d", k, other.decreases, other.records);
  }
  const bool pass = t.records > 0 && t.decreases >= 0.9 * t.records && t.pf_bad == 0;
  return {pass, fmt("k = 2: %d/%d strict decreases, %d accepted steps, %d with power-flow "
                    "residual above 1e-6%s",
                    t.decreases, t.records, t.accepted, t.pf_bad, info.c_str())};
}

struct CaseViolations {
  int base = 0, secured = 0;
};

CaseViolations compare_violations(const PowerSystem& sys, const Dispatch& base,
                                  const Dispatch& secured, std::uint64_t n2_count) {
  auto list = sample_contingencies(sys, 1, sys.n_outage(), 0);
  const auto pairs = sample_contingencies(sys, 2, n2_count, 7);
  list.insert(list.end(), pairs.begin(), pairs.end());
  return {evaluate_dispatch(sys, base, list, 8).total_violations(),
          evaluate_dispatch(sys, secured, list, 8).total_violations()};
}

Verdict criterion_6() {
  const auto start = Clock::now();
  const auto& r14 = run14_k2();
  // 300 covers every N-2 pair of the 14-bus case.
  const auto v14 = compare_violations(case14(), r14.base.x, r14.x, 300);
  const auto cfg = cli::load_run_config(kConfigK2).scopf;
  const auto r118 = run_scopf(case118(), cfg);
  const auto v118 = compare_violations(case118(), r118.base.x, r118.x, 500);
  const double t = seconds_since(start);
  const bool pass = v14.secured < v14.base && v118.secured < v118.base && t < 1800.0;
  return {pass, fmt("14-bus: %d violations vs %d for the base OPF; 118-bus: %d vs %d; %.1f s",
                    v14.secured, v14.base, v118.secured, v118.base, t)};
}

Verdict criterion_7() {
  const auto& sys = case14();
  const auto& opf = case14_opf();
  const int reps = 20;
  AttackConfig ac;
  ac.seed = 7;
  ac.backtracking = false;
  ac.max_iters = 10;
  ac.tolerance = 1e-12;
  // Untimed warm-up so the first k does not pay for cold caches.
  (void)find_worst_case_attack(sys, opf.x, 1, ac);
  std::vector<double> attack_mean, defense_mean;
  std::string detail;
  for (int k : {1, 2, 3}) {
    double attack_total = 0.0, defense_total = 0.0;
    int steps = 0, ip_iters = 0;
    std::int64_t factorizations = 0;
    for (int rep = 0; rep < reps; ++rep) {
      const SolverCounters before = counters();
      auto start = Clock::now();
      const auto res = find_worst_case_attack(sys, opf.x, k, ac);
      attack_total += seconds_since(start);
      factorizations += (counters() - before).kkt_factorizations;
      steps += static_cast<int>(res.trace.iterations.size());

      start = Clock::now();
      const auto step = defense_step(sys, opf.x, res.y, res.solution, DefenseConfig{}, SolverConfig{}, &opf);
      defense_total += seconds_since(start);
      ip_iters += step.base.iterations;
    }
    attack_mean.push_back(attack_total / steps);
    defense_mean.push_back(defense_total / reps);
    detail += fmt("k = %d: %.2f ms/attack iteration (%.1f KKT factorizations), %.2f ms/defense "
                  "step (%d interior-point iterations); ",
                  k, 1e3 * attack_mean.back(), static_cast<double>(factorizations) / steps,
                  1e3 * defense_mean.back(), ip_iters / reps);
  }
  auto spread = [](const std::vector<double>& v) {
    return *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end());
  };
  const double sa = spread(attack_mean), sd = spread(defense_mean);
  detail += fmt("max/min attack %.3f, defense %.3f", sa, sd);
  return {sa <= 1.2 && sd <= 1.2, detail};
}

Verdict criterion_8() {
  const auto& sys = case14();
  const auto& opf = case14_opf();
  std::mt19937_64 rng(808);
  int calls = 0, bad = 0;
  for (int i = 0; i < 5; ++i) {
    const AttackVector y = random_interior_attack(sys, 2, rng);
    const auto sol = solve_third_stage(sys, opf.x, y);
    const SolverCounters before = counters();
    (void)attack_gradient(sys, opf.x, y, sol);
    const SolverCounters d = counters() - before;
    ++calls;
    if (d.kkt_transpose_solves != 1 || d.kkt_factorizations != 0) ++bad;
  }
  const auto res = find_worst_case_attack(sys, opf.x, 2, AttackConfig{});
  const SolverCounters before = counters();
  (void)defense_step(sys, opf.x, res.y, res.solution);
  const SolverCounters d = counters() - before;
  return {bad == 0 && d.third_stage_solves == 0,
          fmt("%d/%d gradient calls with one transpose solve and no factorization; defense step "
              "ran %lld third-stage solves",
              calls - bad, calls, static_cast<long long>(d.third_stage_solves))};
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Verdict criterion_9() {
  scopf::test::TempDir dir("acceptance_det");
  std::string histories[2];
  for (int i = 0; i < 2; ++i) {
    cli::RunArgs args;
    args.case_path = scopf::test::data_path("case14.m");
    args.config_path = kConfigK2;
    args.out_dir = (dir.path / ("run" + std::to_string(i))).string();
    const int code = cli::cmd_run(args);
    if (code != 0) return {false, fmt("cmd_run exited with %d", code)};
    histories[i] = slurp(dir.path / ("run" + std::to_string(i)) / "history.csv");
  }
  const bool same = !histories[0].empty() && histories[0] == histories[1];
  return {same, fmt("history.csv %s (%zu bytes)", same ? "byte-identical" : "differs",
                    histories[0].size())};
}

Verdict criterion_10() {
  std::string detail;
  bool pass = true;
  for (const auto* sys : {&case14(), &case118()}) {
    const auto opf = solve_base_opf(*sys);
    int worst = 0;
    for (const auto& y : {AttackVector::zeros(sys->n_outage(), 2),
                          init_attack(*sys, 2, InitStrategy::uniform_small, 0)}) {
      const auto sol = solve_third_stage(*sys, opf.x, y);
      worst = std::max(worst, derivative_stencil(*sys, sol).max_nonzeros());
    }
    pass = pass && worst <= 20;
    detail += fmt("%d-bus: max %d nonzeros per device; ", sys->n_bus(), worst);
  }
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Verdict()>> criteria = {
      criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
      criterion_6, criterion_7, criterion_8, criterion_9, criterion_10};
  std::vector<bool> selected(criteria.size(), argc == 1);
  for (int a = 1; a < argc; ++a) {
    const int n = std::atoi(argv[a]);
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "unknown criterion %s\n", argv[a]);
      return 2;
    }
    selected[n - 1] = true;
  }
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    Verdict o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %zu: %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
