#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "scopf/attack.hpp"
#include "scopf/driver.hpp"
#include "scopf/evaluation.hpp"

namespace scopf {

using Json = nlohmann::ordered_json;

// Every CSV report starts with this line so it can be traced to its run.
inline constexpr const char* kManifestLine = "# manifest=manifest.json";

Json state_json(const PowerSystem& sys, const NetworkState& w);

/// {"p": [...], "v": [...]} in p.u., plus per-generator MW for reading.
Json dispatch_json(const PowerSystem& sys, const Dispatch& x);
/// Inverse of dispatch_json; throws ParseError on malformed or
/// DimensionError on mis-sized input.
Dispatch dispatch_from_json(const PowerSystem& sys, const Json& j);
Dispatch read_dispatch(const PowerSystem& sys, const std::string& path);

/// y*, loss, stop reason and the attacked devices ranked by outage fraction.
Json attack_json(const PowerSystem& sys, const AttackResult& res, int k);

Json loss_json(const LossBreakdown& l);

/// One row per outer iteration, no wall times.
void write_history_header(std::ostream& out);
void write_history_row(std::ostream& out, const IterationRecord& rec);
/// Full history without wall times.
Json history_json(const PowerSystem& sys, const RunHistory& h);

Json violation_json(const PowerSystem& sys, const ViolationReport& rep);
/// size,scenarios,feasible,infeasible,solver_failures,violations
void write_violation_csv(std::ostream& out, const ViolationReport& rep);

struct OutputFile {
  std::string kind;
  std::string path;
};

/// Provenance of one CLI invocation. Holds the only nondeterministic content
/// (timestamps and wall times) of a run.
struct RunManifest {
  std::string command;
  std::string tool_version;
  std::string case_path;
  std::string case_digest;
  std::string config_digest;  // empty when the command takes no config
  std::uint64_t seed = 0;
  std::string started;   // UTC, ISO 8601
  std::string finished;
  std::vector<OutputFile> outputs;
  Json timings = Json::object();
  int exit_code = 0;
  std::string message;

  [[nodiscard]] Json to_json() const;
};

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

/// Writes text to path atomically (temporary file, then rename).
void write_text_file(const std::string& path, const std::string& text);

}  // namespace scopf
