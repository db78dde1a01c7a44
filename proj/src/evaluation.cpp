#include "scopf/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <thread>

#include "scopf/digest.hpp"

namespace scopf {

namespace {

// Unbiased integer in [0, bound) from a 64-bit engine (rejection sampling).
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r;
  do r = rng();
  while (r >= limit);
  return r % bound;
}

void enumerate(int n, int size, int start, std::vector<int>& cur,
               std::vector<ContingencyScenario>& out) {
  if (static_cast<int>(cur.size()) == size) {
    out.push_back({cur});
    return;
  }
  for (int i = start; i <= n - (size - static_cast<int>(cur.size())); ++i) {
    cur.push_back(i);
    enumerate(n, size, i + 1, cur, out);
    cur.pop_back();
  }
}

}  // namespace

std::uint64_t binomial(int n, int size) {
  if (size < 0 || size > n) return 0;
  size = std::min(size, n - size);
  unsigned __int128 c = 1;
  for (int i = 1; i <= size; ++i) {
    c = c * static_cast<unsigned>(n - size + i) / static_cast<unsigned>(i);
    if (c > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(c);
}

std::vector<ContingencyScenario> sample_contingencies(const PowerSystem& sys, int size,
                                                      std::uint64_t count, std::uint64_t seed) {
  if (size < 1) throw std::invalid_argument("scenario size must be at least 1");
  if (count < 1) throw std::invalid_argument("scenario count must be at least 1");
  const int n = sys.n_outage();
  std::vector<ContingencyScenario> out;
  const std::uint64_t total = binomial(n, size);
  if (total == 0) return out;
  if (count >= total) {
    out.reserve(total);
    std::vector<int> cur;
    enumerate(n, size, 0, cur, out);
    return out;
  }
  std::mt19937_64 rng(seed);
  std::set<std::vector<int>> seen;
  std::vector<int> pool(n);
  out.reserve(count);
  while (out.size() < count) {
    for (int i = 0; i < n; ++i) pool[i] = i;
    for (int i = 0; i < size; ++i) {
      const auto j = i + static_cast<int>(bounded(rng, static_cast<std::uint64_t>(n - i)));
      std::swap(pool[i], pool[j]);
    }
    std::vector<int> pick(pool.begin(), pool.begin() + size);
    std::sort(pick.begin(), pick.end());
    if (seen.insert(pick).second) out.push_back({std::move(pick)});
  }
  return out;
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::feasible: return "feasible";
    case Outcome::infeasible: return "infeasible";
    case Outcome::solver_failure: return "solver_failure";
  }
  return "unknown";
}

ScenarioOutcome check_feasibility(const PowerSystem& sys, const Dispatch& x,
                                  const ContingencyScenario& scenario, double tol,
                                  const SolverConfig& solver) {
  ScenarioOutcome res;
  res.scenario = scenario;
  AttackVector y = AttackVector::zeros(sys.n_outage(), std::max<int>(1, static_cast<int>(scenario.devices.size())));
  for (int j : scenario.devices) {
    if (j < 0 || j >= sys.n_outage()) throw std::out_of_range("scenario references unknown outage slot");
    y.y[j] = 1.0;
  }
  try {
    const auto sol = solve_third_stage(sys, x, y, solver);
    res.slack_norm = sol.s.lpNorm<Eigen::Infinity>();
    res.outcome = sol.converged && res.slack_norm <= tol ? Outcome::feasible : Outcome::infeasible;
  } catch (const std::exception& e) {
    res.outcome = Outcome::solver_failure;
    res.slack_norm = std::nan("");
    res.message = e.what();
  }
  return res;
}

int ViolationReport::total_violations() const {
  int v = 0;
  for (const auto& c : by_size) v += c.violations();
  return v;
}

std::string scenario_digest(const std::vector<ContingencyScenario>& scenarios) {
  std::string text;
  for (const auto& s : scenarios) {
    for (std::size_t i = 0; i < s.devices.size(); ++i) {
      if (i > 0) text += ',';
      text += std::to_string(s.devices[i]);
    }
    text += '\n';
  }
  return sha256_hex(text);
}

ViolationReport evaluate_dispatch(const PowerSystem& sys, const Dispatch& x,
                                  const std::vector<ContingencyScenario>& scenarios,
                                  int parallelism, double tol, const SolverConfig& solver,
                                  std::uint64_t seed) {
  if (scenarios.empty()) throw std::invalid_argument("no scenarios to evaluate");
  ViolationReport rep;
  rep.tol = tol;
  rep.seed = seed;
  rep.digest = scenario_digest(scenarios);
  rep.outcomes.resize(scenarios.size());

  const int workers = std::max(1, std::min<int>(parallelism, static_cast<int>(scenarios.size())));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < scenarios.size(); i = next++)
      rep.outcomes[i] = check_feasibility(sys, x, scenarios[i], tol, solver);
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  std::map<int, SizeCounts> counts;
  std::set<std::vector<int>> infeasible;
  for (const auto& o : rep.outcomes) {
    auto& c = counts[static_cast<int>(o.scenario.devices.size())];
    c.size = static_cast<int>(o.scenario.devices.size());
    ++c.scenarios;
    switch (o.outcome) {
      case Outcome::feasible: ++c.feasible; break;
      case Outcome::infeasible: ++c.infeasible; break;
      case Outcome::solver_failure: ++c.solver_failures; break;
    }
    if (o.violation()) infeasible.insert(o.scenario.devices);
  }
  for (const auto& [size, c] : counts) rep.by_size.push_back(c);

  for (const auto& o : rep.outcomes) {
    const auto& d = o.scenario.devices;
    if (o.violation() || d.size() < 2) continue;
    for (std::size_t drop = 0; drop < d.size(); ++drop) {
      std::vector<int> sub;
      for (std::size_t i = 0; i < d.size(); ++i)
        if (i != drop) sub.push_back(d[i]);
      ++rep.superset_checks;
      if (infeasible.count(sub) > 0) ++rep.feasible_supersets_of_infeasible;
    }
  }
  return rep;
}

}  // namespace scopf
