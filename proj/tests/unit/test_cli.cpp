#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "config_file.hpp"
#include "fixtures.hpp"
#include "scopf/errors.hpp"

using namespace scopf;
using namespace scopf::cli;
using scopf::test::TempDir;
using nlohmann::ordered_json;

namespace {

int invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "scopf");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

ordered_json read_json(const std::string& path) { return ordered_json::parse(slurp(path)); }

std::string first_line(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  return line;
}

const std::string kCase14 = scopf::test::data_path("case14.m");

}  // namespace

TEST_CASE("empty config gives the library defaults") {
  const auto cfg = parse_run_config_text("{}");
  const ScopfConfig def;
  CHECK(cfg.scopf.k == def.k);
  CHECK(cfg.scopf.attack.step_size == def.attack.step_size);
  CHECK(cfg.scopf.outer.max_outer == 50);
  CHECK(cfg.scopf.solver.kkt_tol == def.solver.kkt_tol);
  CHECK(cfg.seed == 0);
}

TEST_CASE("config values reach every section and the seed reaches the attack") {
  const auto cfg = parse_run_config_text(R"({
    "k": 3, "seed": 9, "warm_start": false,
    "attack": {"step_size": 0.05, "init": "random", "backtracking": false},
    "defense": {"damping": 0.5, "loss_backtracks": 4},
    "outer": {"max_outer": 7, "window": 4},
    "solver": {"kkt_tol": 1e-8, "max_newton": 60}
  })");
  CHECK(cfg.scopf.k == 3);
  CHECK(cfg.seed == 9);
  CHECK(cfg.scopf.attack.seed == 9);
  CHECK_FALSE(cfg.scopf.warm_start);
  CHECK(cfg.scopf.attack.step_size == 0.05);
  CHECK(cfg.scopf.attack.init == InitStrategy::random);
  CHECK_FALSE(cfg.scopf.attack.backtracking);
  CHECK(cfg.scopf.defense.damping == 0.5);
  CHECK(cfg.scopf.loss_backtracks == 4);
  CHECK(cfg.scopf.outer.max_outer == 7);
  CHECK(cfg.scopf.outer.window == 4);
  CHECK(cfg.scopf.solver.kkt_tol == 1e-8);
  CHECK(cfg.scopf.solver.max_newton == 60);

  // The effective config round-trips.
  const auto again = parse_run_config(run_config_json(cfg));
  CHECK(run_config_json(again) == run_config_json(cfg));
}

TEST_CASE("config errors are collected and reported together") {
  try {
    parse_run_config_text(R"({"k": "two", "bogus": 1, "solver": {"kkt_tol": -1},
                              "attack": {"init": "zeros", "extra": true}})");
    FAIL("expected a ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("\"k\"") != std::string::npos);
    CHECK(msg.find("bogus") != std::string::npos);
    CHECK(msg.find("kkt_tol") != std::string::npos);
    CHECK(msg.find("zeros") != std::string::npos);
    CHECK(msg.find("extra") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_run_config_text("{not json"), ParseError);
  CHECK_THROWS_AS(parse_run_config_text("[1, 2]"), ParseError);
  CHECK_THROWS_AS(parse_run_config_text(R"({"seed": -1})"), ParseError);
}

TEST_CASE("output directory precedence") {
  ::unsetenv("SCOPF_OUTPUT_DIR");
  CHECK(resolve_output_dir("") == "scopf_out");
  ::setenv("SCOPF_OUTPUT_DIR", "/tmp/from_env", 1);
  CHECK(resolve_output_dir("") == "/tmp/from_env");
  CHECK(resolve_output_dir("mine") == "mine");
  ::unsetenv("SCOPF_OUTPUT_DIR");
}

TEST_CASE("powerflow writes its state and a manifest") {
  TempDir dir("cli_pf");
  CHECK(invoke({"powerflow", "--case", kCase14, "--out", dir.path.string()}) == kSuccess);
  const auto state = read_json(dir.file("state.json"));
  CHECK(state["manifest"] == "manifest.json");
  const auto manifest = read_json(dir.file("manifest.json"));
  CHECK(manifest["exit_code"] == 0);
  CHECK(manifest["command"] == "powerflow");
  CHECK(manifest["case_digest"].get<std::string>().size() == 64);
}

TEST_CASE("exit codes") {
  TempDir dir("cli_codes");
  const std::string out = dir.path.string();

  SUBCASE("usage") {
    CHECK(invoke({}) == kUsage);
    CHECK(invoke({"powerflow"}) == kUsage);
    CHECK(invoke({"frobnicate"}) == kUsage);
    CHECK(invoke({"powerflow", "--case", dir.file("missing.m"), "--out", out}) == kUsage);
    CHECK(read_json(dir.file("manifest.json"))["exit_code"] == kUsage);
  }
  SUBCASE("malformed case") {
    write(dir.file("bad.m"), "mpc.bus = [ 1 3 oops ];\n");
    CHECK(invoke({"powerflow", "--case", dir.file("bad.m"), "--out", out}) == kParse);
    CHECK(read_json(dir.file("manifest.json"))["exit_code"] == kParse);
  }
  SUBCASE("divergent power flow") {
    using namespace scopf::test;
    GenSpec g;
    g.qmax = 300.0;
    g.qmin = -300.0;
    g.pmax = 300.0;
    write(dir.file("heavy.m"), case_text({{3}, {1, 2000.0, 800.0}}, {g}, {{1, 2, 0.0, 0.3}}));
    CHECK(invoke({"powerflow", "--case", dir.file("heavy.m"), "--out", out}) == kDivergence);
  }
  SUBCASE("infeasible OPF") {
    using namespace scopf::test;
    GenSpec g;
    g.pmax = 300.0;
    write(dir.file("short.m"), case_text({{3}, {1, 400.0, 0.0}}, {g}, {{1, 2}}));
    CHECK(invoke({"opf", "--case", dir.file("short.m"), "--out", out}) == kInfeasible);
  }
  SUBCASE("bad config") {
    write(dir.file("cfg.json"), R"({"k": 2, "attack": {"stepsize": 0.1}})");
    CHECK(invoke({"run", "--case", kCase14, "--config", dir.file("cfg.json"), "--out", out}) ==
          kParse);
  }
  SUBCASE("evaluate arguments") {
    CHECK(invoke({"evaluate", "--case", kCase14, "--out", out}) == kUsage);  // no dispatch
    CHECK(invoke({"evaluate", "--case", kCase14, "--dispatch", dir.file("none.json"), "--out",
               out}) == kUsage);
  }
}

TEST_CASE("opf dispatch feeds evaluate and attack") {
  TempDir dir("cli_chain");
  const std::string opf_dir = (dir.path / "opf").string();
  REQUIRE(invoke({"opf", "--case", kCase14, "--out", opf_dir}) == kSuccess);
  const std::string dispatch = (dir.path / "opf" / "dispatch.json").string();
  const auto d = read_json(dispatch);
  CHECK(d["objective"].get<double>() == doctest::Approx(8081.526257).epsilon(1e-6));

  const std::string ev_dir = (dir.path / "ev").string();
  CHECK(invoke({"evaluate", "--case", kCase14, "--dispatch", dispatch, "--sizes", "1,2,3", "--counts",
             "0", "--out", ev_dir}) == kUsage);
  REQUIRE(invoke({"evaluate", "--case", kCase14, "--dispatch", dispatch, "--sizes", "1,2,3",
               "--counts", "25,20,10", "--seed", "4", "--parallelism", "2", "--out",
               ev_dir}) == kSuccess);
  const std::string csv = slurp((dir.path / "ev" / "violations.csv").string());
  CHECK(csv.rfind("# manifest=manifest.json\n", 0) == 0);
  const auto rep = read_json((dir.path / "ev" / "violations.json").string());
  CHECK(rep["manifest"] == "manifest.json");
  int rows = 0;
  std::istringstream lines(csv);
  std::string line;
  while (std::getline(lines, line))
    if (!line.empty() && line[0] >= '1' && line[0] <= '9') ++rows;
  CHECK(rows == 3);

  // k above the number of outage devices is clamped, not rejected.
  const std::string at_dir = (dir.path / "at").string();
  REQUIRE(invoke({"attack", "--case", kCase14, "--dispatch", dispatch, "--k", "100", "--max-iters",
               "2", "--out", at_dir}) == kSuccess);
  const auto at = read_json((dir.path / "at" / "attack.json").string());
  CHECK(at["k"] == 25);
  CHECK(first_line((dir.path / "at" / "attack_trace.csv").string()) ==
        "# manifest=manifest.json");
}

TEST_CASE("run writes its outputs with the manifest reference") {
  TempDir dir("cli_run");
  write(dir.file("cfg.json"), R"({"k": 1, "seed": 3, "outer": {"max_outer": 2}})");
  REQUIRE(invoke({"run", "--case", kCase14, "--config", dir.file("cfg.json"), "--out",
               dir.path.string()}) == kSuccess);
  for (const char* name : {"config.json", "history.csv", "history.json", "base_dispatch.json",
                           "dispatch.json", "manifest.json"})
    CHECK(std::filesystem::exists(dir.file(name)));
  CHECK(first_line(dir.file("history.csv")) == "# manifest=manifest.json");
  CHECK(read_json(dir.file("history.json"))["manifest"] == "manifest.json");
  const auto manifest = read_json(dir.file("manifest.json"));
  CHECK(manifest["exit_code"] == 0);
  CHECK(manifest["seed"] == 3);
  CHECK(manifest["config_digest"].get<std::string>().size() == 64);
  CHECK(read_json(dir.file("config.json"))["outer"]["max_outer"] == 2);
}
