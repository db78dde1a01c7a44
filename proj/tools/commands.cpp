#include "commands.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "config_file.hpp"
#include "scopf/digest.hpp"
#include "scopf/errors.hpp"
#include "scopf/evaluation.hpp"
#include "scopf/report.hpp"

namespace scopf::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Output directory, manifest and error mapping of one command invocation.
class Session {
 public:
  Session(std::string command, const std::string& out_flag) : t0_(Clock::now()) {
    manifest.command = std::move(command);
    manifest.tool_version = kToolVersion;
    manifest.started = utc_timestamp();
    dir_ = resolve_output_dir(out_flag);
  }

  RunManifest manifest;

  void open_dir() {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw UsageError("cannot create output directory " + dir_.string() + ": " + ec.message());
    opened_ = true;
  }

  // Full path of an output file, recorded in the manifest.
  std::string output(const std::string& kind, const std::string& name) {
    manifest.outputs.push_back({kind, name});
    return (dir_ / name).string();
  }

  void write_json(const std::string& kind, const std::string& name, const Json& body) {
    Json j = {{"manifest", "manifest.json"}};
    for (const auto& [key, value] : body.items()) j[key] = value;
    write_text_file(output(kind, name), j.dump(2) + "\n");
  }

  template <typename F>
  int run(F&& body) {
    int code = kSuccess;
    std::string message;
    try {
      body();
    } catch (const UsageError& e) {
      code = kUsage, message = e.what();
    } catch (const ParseError& e) {
      code = kParse, message = e.what();
    } catch (const SemanticError& e) {
      code = kParse, message = e.what();
    } catch (const DimensionError& e) {
      code = kParse, message = e.what();
    } catch (const nlohmann::json::exception& e) {
      code = kParse, message = e.what();
    } catch (const InfeasibleError& e) {
      code = kInfeasible, message = e.what();
    } catch (const ConvergenceError& e) {
      code = kDivergence, message = e.what();
    } catch (const SingularMatrixError& e) {
      code = kDivergence, message = e.what();
    } catch (const NumericalError& e) {
      code = kDivergence, message = e.what();
    } catch (const std::exception& e) {
      code = kInternal, message = e.what();
    }
    if (code != kSuccess) std::cerr << "error: " << message << '\n';
    finish(code, message);
    return code;
  }

 private:
  void finish(int code, const std::string& message) {
    manifest.exit_code = code;
    manifest.message = message;
    manifest.finished = utc_timestamp();
    manifest.timings["total_seconds"] = seconds_since(t0_);
    if (!opened_) {
      std::error_code ec;
      fs::create_directories(dir_, ec);
      if (ec) return;
    }
    try {
      write_text_file((dir_ / "manifest.json").string(), manifest.to_json().dump(2) + "\n");
    } catch (const std::exception& e) {
      std::cerr << "warning: manifest not written: " << e.what() << '\n';
    }
  }

  fs::path dir_;
  bool opened_ = false;
  Clock::time_point t0_;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " is required");
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
}

PowerSystem load_case(Session& s, const std::string& path) {
  require_file(path, "case file");
  s.manifest.case_path = path;
  s.manifest.case_digest = sha256_file(path);
  return load_case_file(path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

RunConfig load_config(Session& s, const std::string& path) {
  require_file(path, "config file");
  const std::string text = read_text(path);
  s.manifest.config_digest = sha256_hex(text);
  return parse_run_config_text(text);
}

int clamp_budget(const PowerSystem& sys, int k) {
  if (k > sys.n_outage() && sys.n_outage() > 0) {
    std::cerr << "warning: k = " << k << " exceeds the " << sys.n_outage()
              << " outage-eligible devices; using k = " << sys.n_outage() << '\n';
    return sys.n_outage();
  }
  return k;
}

void print_dispatch(const PowerSystem& sys, const Dispatch& x, const NetworkState& w) {
  const Vector pg = generator_outputs(sys, x, w);
  std::cout << "  gen  bus      P (MW)   Q (MVAr)   V (p.u.)\n";
  for (int g = 0; g < sys.n_gen(); ++g)
    std::cout << std::setw(5) << g << std::setw(5) << sys.buses[sys.generators[g].bus].id
              << std::fixed << std::setprecision(3) << std::setw(12) << pg[g] * sys.base_mva
              << std::setw(11) << w.qg[g] * sys.base_mva << std::setw(11) << x.v[g] << '\n'
              << std::defaultfloat;
}

}  // namespace

std::string resolve_output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("SCOPF_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
  return "scopf_out";
}

int cmd_powerflow(const PowerflowArgs& args) {
  Session s("powerflow", args.out_dir);
  return s.run([&] {
    const auto sys = load_case(s, args.case_path);
    Dispatch x = nominal_dispatch(sys);
    if (!args.dispatch_path.empty()) {
      require_file(args.dispatch_path, "dispatch file");
      x = read_dispatch(sys, args.dispatch_path);
    }
    if (args.tol <= 0.0 || args.max_iter < 1) throw UsageError("--tol and --max-iter must be positive");
    s.open_dir();
    PowerFlowOptions opts;
    opts.tol = args.tol;
    opts.max_iter = args.max_iter;
    const auto pf = solve_power_flow(sys, x, nullptr, opts);
    if (!pf.converged) {
      std::ostringstream msg;
      msg << "power flow diverged after " << pf.iterations << " iterations (mismatch "
          << pf.residual << " p.u.)";
      throw ConvergenceError(msg.str(), {});
    }
    Json body = state_json(sys, pf.state);
    body["iterations"] = pf.iterations;
    body["residual"] = pf.residual;
    s.write_json("state", "state.json", body);
    std::cout << "power flow converged in " << pf.iterations << " iterations, mismatch "
              << pf.residual << " p.u.\n";
    print_dispatch(sys, x, pf.state);
  });
}

int cmd_opf(const OpfArgs& args) {
  Session s("opf", args.out_dir);
  return s.run([&] {
    const auto sys = load_case(s, args.case_path);
    RunConfig cfg;
    if (!args.config_path.empty()) cfg = load_config(s, args.config_path);
    s.open_dir();
    const auto t0 = Clock::now();
    const auto opf = solve_base_opf(sys, cfg.scopf.solver);
    s.manifest.timings["opf_seconds"] = seconds_since(t0);
    Json d = dispatch_json(sys, opf.x);
    d["objective"] = opf.objective;
    d["kkt_residual"] = opf.kkt_residual;
    s.write_json("dispatch", "dispatch.json", d);
    s.write_json("state", "state.json", state_json(sys, opf.state));
    std::cout << "base OPF cost " << std::setprecision(10) << opf.objective << " $/h after "
              << opf.iterations << " Newton steps (KKT residual " << std::setprecision(3)
              << opf.kkt_residual << ")\n";
    print_dispatch(sys, opf.x, opf.state);
  });
}

int cmd_attack(const AttackArgs& args) {
  Session s("attack", args.out_dir);
  return s.run([&] {
    const auto sys = load_case(s, args.case_path);
    require_file(args.dispatch_path, "dispatch file");
    RunConfig cfg;
    if (!args.config_path.empty()) cfg = load_config(s, args.config_path);
    if (args.k < 1) throw UsageError("--k must be at least 1");
    AttackConfig ac = cfg.scopf.attack;
    if (args.seed) ac.seed = *args.seed;
    if (args.max_iters) ac.max_iters = *args.max_iters;
    if (args.step_size) ac.step_size = *args.step_size;
    if (args.init) {
      try {
        ac.init = parse_init_strategy(*args.init);
      } catch (const std::exception& e) {
        throw UsageError(e.what());
      }
      if (ac.init == InitStrategy::warm_start)
        throw UsageError("--init warm_start needs a previous attack; use uniform_small or random");
    }
    if (ac.max_iters < 0 || ac.step_size < 0.0) throw UsageError("--max-iters and --step-size must be nonnegative");
    s.manifest.seed = ac.seed;
    const Dispatch x = read_dispatch(sys, args.dispatch_path);
    const int k = clamp_budget(sys, args.k);
    s.open_dir();

    const auto t0 = Clock::now();
    const auto res = find_worst_case_attack(sys, x, k, ac, cfg.scopf.solver);
    s.manifest.timings["attack_seconds"] = seconds_since(t0);

    s.write_json("attack", "attack.json", attack_json(sys, res, k));
    std::ostringstream trace;
    trace << kManifestLine << '\n';
    res.trace.write_csv(trace);
    write_text_file(s.output("attack_trace", "attack_trace.csv"), trace.str());

    const double gain = res.trace.initial_loss != 0.0
                            ? 100.0 * (res.loss - res.trace.initial_loss) / std::abs(res.trace.initial_loss)
                            : 0.0;
    std::cout << "attack loss " << std::setprecision(8) << res.trace.initial_loss << " -> "
              << res.loss << " (" << std::setprecision(3) << gain << "%) in "
              << res.trace.iterations.size() << " iterations, " << res.trace.stop_reason << '\n';
    for (Eigen::Index j = 0; j < res.y.y.size(); ++j)
      if (res.y.y[j] > 1e-6)
        std::cout << "  " << sys.device_label(static_cast<int>(j)) << "  y = " << res.y.y[j] << '\n';
  });
}

int cmd_run(const RunArgs& args) {
  Session s("run", args.out_dir);
  return s.run([&] {
    const auto sys = load_case(s, args.case_path);
    RunConfig cfg = load_config(s, args.config_path);
    cfg.scopf.k = clamp_budget(sys, cfg.scopf.k);
    s.manifest.seed = cfg.seed;
    s.open_dir();
    s.write_json("config", "config.json", run_config_json(cfg));

    const std::string history_path = s.output("history_csv", "history.csv");
    std::ofstream history(history_path, std::ios::binary | std::ios::trunc);
    if (!history) throw UsageError("cannot write " + history_path);
    write_history_header(history);
    history.flush();

    Json times = Json::array();
    auto on_iteration = [&](const IterationRecord& r) {
      write_history_row(history, r);
      history.flush();
      times.push_back({{"iteration", r.iteration},
                       {"attack", r.seconds.attack},
                       {"defense", r.seconds.defense},
                       {"evaluation", r.seconds.evaluation}});
      std::cout << "iteration " << r.iteration << ": loss " << std::setprecision(10)
                << r.pre.total << " -> " << r.post.total << (r.stalled ? " (stalled)" : "")
                << '\n';
    };
    const auto t0 = Clock::now();
    ScopfResult res;
    try {
      res = run_scopf(sys, cfg.scopf, on_iteration);
    } catch (...) {
      s.manifest.timings["iterations"] = times;
      throw;
    }
    s.manifest.timings["run_seconds"] = seconds_since(t0);
    s.manifest.timings["iterations"] = times;

    s.write_json("history_json", "history.json", history_json(sys, res.history));
    Json base = dispatch_json(sys, res.base.x);
    base["objective"] = res.base.objective;
    s.write_json("base_dispatch", "base_dispatch.json", base);
    s.write_json("dispatch", "dispatch.json", dispatch_json(sys, res.x));
    std::cout << (res.history.converged ? "converged" : "stopped") << " after "
              << res.history.records.size() << " outer iterations: " << res.history.reason << '\n';
    if (res.history.max_outer_reached) std::cerr << "warning: max_outer reached\n";
    if (!res.history.converged) throw ConvergenceError("run did not converge: " + res.history.reason, {});
  });
}

int cmd_evaluate(const EvaluateArgs& args) {
  Session s("evaluate", args.out_dir);
  return s.run([&] {
    if (args.sizes.empty()) throw UsageError("--sizes must not be empty");
    if (args.counts.size() != 1 && args.counts.size() != args.sizes.size())
      throw UsageError("--counts needs one value or one per size");
    for (int sz : args.sizes)
      if (sz < 1) throw UsageError("--sizes entries must be at least 1");
    for (auto c : args.counts)
      if (c < 1) throw UsageError("--counts entries must be at least 1");
    if (args.parallelism < 1) throw UsageError("--parallelism must be at least 1");
    if (!(args.tol > 0.0)) throw UsageError("--tol must be positive");

    const auto sys = load_case(s, args.case_path);
    require_file(args.dispatch_path, "dispatch file");
    RunConfig cfg;
    if (!args.config_path.empty()) cfg = load_config(s, args.config_path);
    const Dispatch x = read_dispatch(sys, args.dispatch_path);
    s.manifest.seed = args.seed;
    s.open_dir();

    std::vector<ContingencyScenario> scenarios;
    for (std::size_t i = 0; i < args.sizes.size(); ++i) {
      const auto count = args.counts.size() == 1 ? args.counts[0] : args.counts[i];
      auto part = sample_contingencies(sys, args.sizes[i], count, args.seed);
      if (part.empty())
        std::cerr << "warning: no scenarios of size " << args.sizes[i] << " on this case\n";
      scenarios.insert(scenarios.end(), part.begin(), part.end());
    }
    if (scenarios.empty()) throw UsageError("no scenarios to evaluate");

    const auto t0 = Clock::now();
    const auto rep = evaluate_dispatch(sys, x, scenarios, args.parallelism, args.tol,
                                       cfg.scopf.solver, args.seed);
    s.manifest.timings["evaluation_seconds"] = seconds_since(t0);

    s.write_json("violations_json", "violations.json", violation_json(sys, rep));
    std::ostringstream csv;
    write_violation_csv(csv, rep);
    write_text_file(s.output("violations_csv", "violations.csv"), csv.str());

    std::cout << "size  scenarios  violations\n";
    for (const auto& c : rep.by_size)
      std::cout << std::setw(4) << c.size << std::setw(11) << c.scenarios << std::setw(12)
                << c.violations() << '\n';
    std::cout << "feasible supersets of infeasible scenarios: "
              << rep.feasible_supersets_of_infeasible << " of " << rep.superset_checks
              << " checks\n";
  });
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Security-constrained OPF via adversarial contingency search"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  PowerflowArgs pf;
  auto* c_pf = app.add_subcommand("powerflow", "Solve the AC power flow of a dispatch");
  c_pf->add_option("--case", pf.case_path, "MATPOWER-style case file")->required();
  c_pf->add_option("--dispatch", pf.dispatch_path, "dispatch JSON (default: case set points)");
  c_pf->add_option("--out", pf.out_dir, "output directory");
  c_pf->add_option("--tol", pf.tol, "mismatch tolerance, p.u.")->capture_default_str();
  c_pf->add_option("--max-iter", pf.max_iter, "Newton iteration limit")->capture_default_str();

  OpfArgs opf;
  auto* c_opf = app.add_subcommand("opf", "Solve the base-case AC OPF");
  c_opf->add_option("--case", opf.case_path, "MATPOWER-style case file")->required();
  c_opf->add_option("--config", opf.config_path, "run config (solver section)");
  c_opf->add_option("--out", opf.out_dir, "output directory");

  AttackArgs at;
  auto* c_at = app.add_subcommand("attack", "Find a worst-case relaxed N-k attack on a dispatch");
  c_at->add_option("--case", at.case_path, "MATPOWER-style case file")->required();
  c_at->add_option("--dispatch", at.dispatch_path, "dispatch JSON");
  c_at->add_option("--config", at.config_path, "run config (attack and solver sections)");
  c_at->add_option("--out", at.out_dir, "output directory");
  c_at->add_option("--k", at.k, "attack budget")->capture_default_str();
  c_at->add_option("--seed", at.seed, "random seed");
  c_at->add_option("--max-iters", at.max_iters, "PGD iterations");
  c_at->add_option("--step-size", at.step_size, "PGD step size");
  c_at->add_option("--init", at.init, "uniform_small or random");

  RunArgs run;
  auto* c_run = app.add_subcommand("run", "Run the attack/defense SCOPF loop");
  c_run->add_option("--case", run.case_path, "MATPOWER-style case file")->required();
  c_run->add_option("--config", run.config_path, "run config JSON")->required();
  c_run->add_option("--out", run.out_dir, "output directory");

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "Count contingency violations of a dispatch");
  c_ev->add_option("--case", ev.case_path, "MATPOWER-style case file")->required();
  c_ev->add_option("--dispatch", ev.dispatch_path, "dispatch JSON");
  c_ev->add_option("--config", ev.config_path, "run config (solver section)");
  c_ev->add_option("--out", ev.out_dir, "output directory");
  c_ev->add_option("--sizes", ev.sizes, "scenario sizes, e.g. 1,2")->delimiter(',')->capture_default_str();
  c_ev->add_option("--counts", ev.counts, "scenarios per size (exhaustive when large enough)")
      ->delimiter(',')
      ->capture_default_str();
  c_ev->add_option("--seed", ev.seed, "sampling seed")->capture_default_str();
  c_ev->add_option("--parallelism", ev.parallelism, "worker threads")->capture_default_str();
  c_ev->add_option("--tol", ev.tol, "slack tolerance, p.u.")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kUsage;
  }
  if (*c_pf) return cmd_powerflow(pf);
  if (*c_opf) return cmd_opf(opf);
  if (*c_at) return cmd_attack(at);
  if (*c_run) return cmd_run(run);
  return cmd_evaluate(ev);
}

}  // namespace scopf::cli
