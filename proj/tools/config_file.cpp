#include "config_file.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "scopf/errors.hpp"

namespace scopf::cli {

namespace {

using Json = nlohmann::ordered_json;

class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  // Reports keys of obj that are not in `known`, prefixed by path.
  void check_keys(const Json& obj, const std::string& path, const std::set<std::string>& known) {
    for (const auto& [key, value] : obj.items())
      if (known.count(key) == 0) errors_.push_back("unknown key \"" + path + key + "\"");
  }

  template <typename T>
  void read(const Json& obj, const std::string& path, const char* key, T& out) {
    if (!obj.contains(key)) return;
    const Json& v = obj[key];
    const std::string name = path + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) return fail(name, "a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) return fail(name, "an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned() || v.get<long long>() >= 0) {
          out = v.get<T>();
        } else {
          fail(name, "a nonnegative integer");
        }
      } else {
        out = v.get<T>();
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) return fail(name, "a number");
      out = v.get<T>();
    } else {
      if (!v.is_string()) return fail(name, "a string");
      out = v.get<T>();
    }
  }

  const Json* section(const Json& root, const char* key) {
    if (!root.contains(key)) return nullptr;
    if (!root[key].is_object()) {
      fail(key, "an object");
      return nullptr;
    }
    return &root[key];
  }

 private:
  void fail(const std::string& name, const char* what) {
    errors_.push_back("\"" + name + "\" must be " + what);
  }
  std::vector<std::string>& errors_;
};

}  // namespace

RunConfig parse_run_config(const Json& j) {
  if (!j.is_object()) throw ParseError("config must be a JSON object", 0);
  RunConfig cfg;
  auto& s = cfg.scopf;
  std::vector<std::string> errors;
  Reader r(errors);

  r.check_keys(j, "", {"k", "seed", "warm_start", "attack", "defense", "outer", "solver"});
  r.read(j, "", "k", s.k);
  r.read(j, "", "seed", cfg.seed);
  r.read(j, "", "warm_start", s.warm_start);

  if (const Json* a = r.section(j, "attack")) {
    r.check_keys(*a, "attack.", {"step_size", "max_iters", "tolerance", "init", "backtracking",
                                 "max_backtracks", "failure_retries"});
    r.read(*a, "attack.", "step_size", s.attack.step_size);
    r.read(*a, "attack.", "max_iters", s.attack.max_iters);
    r.read(*a, "attack.", "tolerance", s.attack.tolerance);
    std::string init = to_string(s.attack.init);
    r.read(*a, "attack.", "init", init);
    try {
      s.attack.init = parse_init_strategy(init);
    } catch (const std::exception& e) {
      errors.push_back(std::string("attack.init: ") + e.what());
    }
    r.read(*a, "attack.", "backtracking", s.attack.backtracking);
    r.read(*a, "attack.", "max_backtracks", s.attack.max_backtracks);
    r.read(*a, "attack.", "failure_retries", s.attack.failure_retries);
  }
  if (const Json* d = r.section(j, "defense")) {
    r.check_keys(*d, "defense.",
                 {"base_tol", "damping", "max_retries", "loss_backtracks", "max_stalls"});
    r.read(*d, "defense.", "base_tol", s.defense.base_tol);
    r.read(*d, "defense.", "damping", s.defense.damping);
    r.read(*d, "defense.", "max_retries", s.defense.max_retries);
    r.read(*d, "defense.", "loss_backtracks", s.loss_backtracks);
    r.read(*d, "defense.", "max_stalls", s.max_stalls);
  }
  if (const Json* o = r.section(j, "outer")) {
    r.check_keys(*o, "outer.", {"max_outer", "loss_tol", "window", "dispatch_tol"});
    r.read(*o, "outer.", "max_outer", s.outer.max_outer);
    r.read(*o, "outer.", "loss_tol", s.outer.loss_tol);
    r.read(*o, "outer.", "window", s.outer.window);
    r.read(*o, "outer.", "dispatch_tol", s.outer.dispatch_tol);
  }
  if (const Json* v = r.section(j, "solver")) {
    r.check_keys(*v, "solver.",
                 {"kkt_tol", "pf_tol", "barrier_min", "barrier_init", "barrier_factor",
                  "max_newton", "max_pf_iter", "cost_scale", "slack_weight", "angle_reg",
                  "voltage_band"});
    r.read(*v, "solver.", "kkt_tol", s.solver.kkt_tol);
    r.read(*v, "solver.", "pf_tol", s.solver.pf_tol);
    r.read(*v, "solver.", "barrier_min", s.solver.barrier_min);
    r.read(*v, "solver.", "barrier_init", s.solver.barrier_init);
    r.read(*v, "solver.", "barrier_factor", s.solver.barrier_factor);
    r.read(*v, "solver.", "max_newton", s.solver.max_newton);
    r.read(*v, "solver.", "max_pf_iter", s.solver.max_pf_iter);
    r.read(*v, "solver.", "cost_scale", s.solver.cost_scale);
    r.read(*v, "solver.", "slack_weight", s.solver.slack_weight);
    r.read(*v, "solver.", "angle_reg", s.solver.angle_reg);
    r.read(*v, "solver.", "voltage_band", s.solver.voltage_band);
  }
  s.attack.seed = cfg.seed;

  // Fields with type errors kept their defaults, so the value checks still apply.
  try {
    s.validate();
  } catch (const ContractViolation& e) {
    std::istringstream lines(e.what());
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line)) errors.push_back(line.substr(line.find_first_not_of(' ')));
  }
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ParseError(msg, 0);
  }
  return cfg;
}

RunConfig parse_run_config_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what(), 0);
  }
  return parse_run_config(j);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config_text(buf.str());
}

Json run_config_json(const RunConfig& cfg) {
  const auto& s = cfg.scopf;
  return {{"k", s.k},
          {"seed", cfg.seed},
          {"warm_start", s.warm_start},
          {"attack",
           {{"step_size", s.attack.step_size},
            {"max_iters", s.attack.max_iters},
            {"tolerance", s.attack.tolerance},
            {"init", to_string(s.attack.init)},
            {"backtracking", s.attack.backtracking},
            {"max_backtracks", s.attack.max_backtracks},
            {"failure_retries", s.attack.failure_retries}}},
          {"defense",
           {{"base_tol", s.defense.base_tol},
            {"damping", s.defense.damping},
            {"max_retries", s.defense.max_retries},
            {"loss_backtracks", s.loss_backtracks},
            {"max_stalls", s.max_stalls}}},
          {"outer",
           {{"max_outer", s.outer.max_outer},
            {"loss_tol", s.outer.loss_tol},
            {"window", s.outer.window},
            {"dispatch_tol", s.outer.dispatch_tol}}},
          {"solver",
           {{"kkt_tol", s.solver.kkt_tol},
            {"pf_tol", s.solver.pf_tol},
            {"barrier_min", s.solver.barrier_min},
            {"barrier_init", s.solver.barrier_init},
            {"barrier_factor", s.solver.barrier_factor},
            {"max_newton", s.solver.max_newton},
            {"max_pf_iter", s.solver.max_pf_iter},
            {"cost_scale", s.solver.cost_scale},
            {"slack_weight", s.solver.slack_weight},
            {"angle_reg", s.solver.angle_reg},
            {"voltage_band", s.solver.voltage_band}}}};
}

}  // namespace scopf::cli
