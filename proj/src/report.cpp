#include "scopf/report.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "scopf/errors.hpp"

namespace scopf {

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector vector_field(const Json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array())
    throw ParseError(std::string("dispatch file needs an array \"") + key + "\"", 0);
  Vector v(static_cast<Eigen::Index>(j[key].size()));
  for (std::size_t i = 0; i < j[key].size(); ++i) {
    if (!j[key][i].is_number())
      throw ParseError(std::string("non-numeric entry in \"") + key + "\"", 0);
    v[static_cast<Eigen::Index>(i)] = j[key][i].get<double>();
  }
  return v;
}

// Nonzero entries of y as "slot:value" joined by ';', in slot order.
std::string attacked_devices(const AttackVector& y) {
  std::ostringstream s;
  s << std::setprecision(17);
  bool first = true;
  for (Eigen::Index j = 0; j < y.y.size(); ++j) {
    if (y.y[j] <= 0.0) continue;
    if (!first) s << ';';
    s << j << ':' << y.y[j];
    first = false;
  }
  return s.str();
}

}  // namespace

Json state_json(const PowerSystem& sys, const NetworkState& w) {
  Json buses = Json::array();
  for (int i = 0; i < sys.n_bus(); ++i)
    buses.push_back({{"id", sys.buses[i].id}, {"vm", w.vm[i]}, {"va", w.va[i]}});
  Json gens = Json::array();
  for (int g = 0; g < sys.n_gen(); ++g)
    gens.push_back({{"bus", sys.buses[sys.generators[g].bus].id}, {"qg", w.qg[g]}});
  return {{"units", "p.u., radians"},
          {"base_mva", sys.base_mva},
          {"buses", buses},
          {"generators", gens},
          {"p_slack", w.p_slack}};
}

Json dispatch_json(const PowerSystem& sys, const Dispatch& x) {
  Json mw = Json::array();
  for (int g = 0; g < sys.n_gen(); ++g) {
    const int i = Dispatch::p_index(sys, g);
    mw.push_back(i < 0 ? Json(nullptr) : Json(x.p[i] * sys.base_mva));
  }
  return {{"p", to_std(x.p)}, {"v", to_std(x.v)}, {"p_mw", mw}};
}

Dispatch dispatch_from_json(const PowerSystem& sys, const Json& j) {
  if (!j.is_object()) throw ParseError("dispatch file must hold a JSON object", 0);
  Dispatch x{vector_field(j, "p"), vector_field(j, "v")};
  x.check(sys);
  return x;
}

Dispatch read_dispatch(const PowerSystem& sys, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
  return dispatch_from_json(sys, j);
}

Json attack_json(const PowerSystem& sys, const AttackResult& res, int k) {
  std::vector<int> order(static_cast<std::size_t>(res.y.y.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return res.y.y[a] > res.y.y[b]; });
  Json ranking = Json::array();
  for (int j : order) {
    if (res.y.y[j] <= 0.0) break;
    const auto& dev = sys.outage_devices[j];
    ranking.push_back({{"slot", j},
                       {"device", sys.device_label(j)},
                       {"kind", dev.kind == DeviceKind::branch ? "branch" : "generator"},
                       {"y", res.y.y[j]}});
  }
  return {{"k", k},
          {"y", to_std(res.y.y)},
          {"initial_loss", res.trace.initial_loss},
          {"loss", res.loss},
          {"iterations", res.trace.iterations.size()},
          {"converged", res.trace.converged},
          {"stop_reason", res.trace.stop_reason},
          {"slack_inf_norm", res.solution.s.lpNorm<Eigen::Infinity>()},
          {"ranking", ranking}};
}

Json loss_json(const LossBreakdown& l) {
  return {{"f_base", l.f_base}, {"f_cont", l.f_cont}, {"slack_penalty", l.slack_penalty},
          {"total", l.total}};
}

void write_history_header(std::ostream& out) {
  out << kManifestLine << '\n'
      << "iteration,attacked,pre_f_base,pre_f_cont,pre_slack,pre_total,post_f_base,post_f_cont,"
         "post_slack,post_total,attack_steps,base_kkt_residual,base_pf_residual,coupling_norm,"
         "damping,stalled,dispatch_change\n";
}

void write_history_row(std::ostream& out, const IterationRecord& r) {
  std::ostringstream s;
  s << std::setprecision(17);
  s << r.iteration << ',' << attacked_devices(r.y_star) << ',' << r.pre.f_base << ','
    << r.pre.f_cont << ',' << r.pre.slack_penalty << ',' << r.pre.total << ',' << r.post.f_base
    << ',' << r.post.f_cont << ',' << r.post.slack_penalty << ',' << r.post.total << ','
    << r.attack_steps << ',' << r.base_kkt_residual << ',' << r.base_pf_residual << ','
    << r.coupling_norm << ',' << r.damping << ',' << (r.stalled ? 1 : 0) << ','
    << r.dispatch_change << '\n';
  out << s.str();
}

Json history_json(const PowerSystem& sys, const RunHistory& h) {
  Json recs = Json::array();
  for (const auto& r : h.records) {
    Json trace = Json::array();
    for (const auto& a : r.attack.iterations)
      trace.push_back({{"iteration", a.iteration},
                       {"loss", a.loss},
                       {"grad_norm", a.grad_norm},
                       {"step", a.step},
                       {"projection_active", a.projection_active},
                       {"backtracks", a.backtracks}});
    recs.push_back({{"iteration", r.iteration},
                    {"y_star", to_std(r.y_star.y)},
                    {"pre", loss_json(r.pre)},
                    {"post", loss_json(r.post)},
                    {"attack",
                     {{"initial_loss", r.attack.initial_loss},
                      {"stop_reason", r.attack.stop_reason},
                      {"trace", trace}}},
                    {"base_kkt_residual", r.base_kkt_residual},
                    {"base_pf_residual", r.base_pf_residual},
                    {"coupling_norm", r.coupling_norm},
                    {"damping", r.damping},
                    {"stalled", r.stalled},
                    {"dispatch_change", r.dispatch_change},
                    {"x", dispatch_json(sys, r.x)}});
  }
  return {{"x_init", dispatch_json(sys, h.x_init)},
          {"converged", h.converged},
          {"max_outer_reached", h.max_outer_reached},
          {"reason", h.reason},
          {"records", recs}};
}

Json violation_json(const PowerSystem& sys, const ViolationReport& rep) {
  Json scen = Json::array();
  for (const auto& o : rep.outcomes) {
    Json labels = Json::array();
    for (int d : o.scenario.devices) labels.push_back(sys.device_label(d));
    Json e = {{"devices", o.scenario.devices},
              {"labels", labels},
              {"outcome", to_string(o.outcome)},
              {"slack_inf_norm", std::isnan(o.slack_norm) ? Json(nullptr) : Json(o.slack_norm)}};
    if (!o.message.empty()) e["message"] = o.message;
    scen.push_back(e);
  }
  Json agg = Json::array();
  for (const auto& c : rep.by_size)
    agg.push_back({{"size", c.size},
                   {"scenarios", c.scenarios},
                   {"feasible", c.feasible},
                   {"infeasible", c.infeasible},
                   {"solver_failures", c.solver_failures},
                   {"violations", c.violations()}});
  return {{"tol", rep.tol},
          {"seed", rep.seed},
          {"scenario_digest", rep.digest},
          {"total_violations", rep.total_violations()},
          {"superset_checks", rep.superset_checks},
          {"feasible_supersets_of_infeasible", rep.feasible_supersets_of_infeasible},
          {"by_size", agg},
          {"scenarios", scen}};
}

void write_violation_csv(std::ostream& out, const ViolationReport& rep) {
  out << kManifestLine << '\n' << "size,scenarios,feasible,infeasible,solver_failures,violations\n";
  for (const auto& c : rep.by_size)
    out << c.size << ',' << c.scenarios << ',' << c.feasible << ',' << c.infeasible << ','
        << c.solver_failures << ',' << c.violations() << '\n';
}

Json RunManifest::to_json() const {
  Json outs = Json::array();
  for (const auto& o : outputs) outs.push_back({{"kind", o.kind}, {"path", o.path}});
  return {{"command", command},
          {"tool_version", tool_version},
          {"case_path", case_path},
          {"case_digest", case_digest},
          {"config_digest", config_digest.empty() ? Json(nullptr) : Json(config_digest)},
          {"seed", seed},
          {"started", started},
          {"finished", finished},
          {"exit_code", exit_code},
          {"message", message},
          {"outputs", outs},
          {"timings", timings}};
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace scopf
