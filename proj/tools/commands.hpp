#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace scopf::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes shared by every command.
enum ExitCode : int {
  kSuccess = 0,
  kInternal = 1,   // unexpected failure (bug)
  kUsage = 2,      // bad flags, missing or unreadable input files
  kParse = 3,      // malformed case, dispatch or config file
  kDivergence = 4, // power flow or solver did not converge
  kInfeasible = 5, // limits admit no dispatch
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// --out if set, else $SCOPF_OUTPUT_DIR, else "scopf_out".
std::string resolve_output_dir(const std::string& flag);

struct PowerflowArgs {
  std::string case_path;
  std::string dispatch_path;  // nominal set points when empty
  std::string out_dir;
  double tol = 1e-8;
  int max_iter = 50;
};

struct OpfArgs {
  std::string case_path;
  std::string config_path;  // optional; only the solver section is used
  std::string out_dir;
};

struct AttackArgs {
  std::string case_path;
  std::string dispatch_path;
  std::string config_path;  // optional attack and solver settings
  std::string out_dir;
  int k = 2;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_iters;
  std::optional<double> step_size;
  std::optional<std::string> init;
};

struct RunArgs {
  std::string case_path;
  std::string config_path;
  std::string out_dir;
};

struct EvaluateArgs {
  std::string case_path;
  std::string dispatch_path;
  std::string config_path;  // optional; only the solver section is used
  std::string out_dir;
  std::vector<int> sizes{1};
  std::vector<std::uint64_t> counts{1000};  // one per size, or one for all
  std::uint64_t seed = 0;
  int parallelism = 1;
  double tol = 1e-4;
};

int cmd_powerflow(const PowerflowArgs& args);
int cmd_opf(const OpfArgs& args);
int cmd_attack(const AttackArgs& args);
int cmd_run(const RunArgs& args);
int cmd_evaluate(const EvaluateArgs& args);

/// Parses argv and dispatches to a command; returns the exit code.
int run_cli(int argc, char** argv);

}  // namespace scopf::cli
