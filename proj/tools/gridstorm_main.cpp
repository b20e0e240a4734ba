#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "gridstorm/harness.hpp"

namespace {

using namespace gridstorm;

harness::RunConfig base_config(const std::string& case_file, const std::string& system,
                               int scenario, const std::string& pacing,
                               const std::string& attacker, double dt, double t_end,
                               bool no_fault) {
  harness::RunConfig cfg;
  cfg.case_file = case_file;
  if (system == "I")
    cfg.system = model::SystemMix::I;
  else if (system == "II")
    cfg.system = model::SystemMix::II;
  else
    cfg.system = model::SystemMix::None;
  cfg.scenario = scenario;
  cfg.dt = dt;
  cfg.t_end = t_end;
  cfg.pacing = pacing == "realtime" ? harness::Pacing::RealTime : harness::Pacing::Lockstep;
  if (attacker == "external")
    cfg.attacker = harness::AttackerMode::External;
  else if (attacker == "none")
    cfg.attacker = harness::AttackerMode::None;
  else
    cfg.attacker = harness::AttackerMode::Embedded;
  cfg.include_fault = !no_fault;
  return cfg;
}

void print_metrics(const harness::CaseMetrics& m) {
  std::printf("case      %s\n", m.label.c_str());
  std::printf("f_nadir   %.4f Hz\n", m.f_nadir_hz);
  std::printf("f_peak    %.4f Hz\n", m.f_peak_hz);
  if (m.t_settle_s)
    std::printf("t_settle  %.3f s\n", *m.t_settle_s);
  else
    std::printf("t_settle  (did not settle)\n");
  std::printf("v_min     %.4f pu\n", m.v_min_pu);
  std::printf("v_max     %.4f pu\n", m.v_max_pu);
  std::printf("uv_dur    %.3f s\n", m.uv_duration_s);
  std::printf("verdict   %s\n", harness::verdict_name(m.verdict));
  for (const auto& v : m.violations)
    std::printf("violation %s bus %d [%.3f, %.3f] extremum %.4f\n",
                protection::violation_kind_name(v.kind), v.bus, v.t_start, v.t_end, v.extremum);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridstorm: dynamic-phasor grid simulator with an attackable telemetry link"};
  app.require_subcommand(1);

  std::string case_file = "data/ieee39.case";
  std::string system = "I";
  int scenario = 1;
  std::string pacing = "lockstep";
  std::string attacker = "embedded";
  std::string output_dir;
  std::string telemetry_dest, command_listen;
  double dt = 1e-3;
  double t_end = 3.0;
  bool no_fault = false;

  auto* run = app.add_subcommand("run", "run one test case");
  run->add_option("--case", case_file, "case file")->capture_default_str();
  run->add_option("--system", system, "microgrid mix: I, II, or none")
      ->check(CLI::IsMember({"I", "II", "none"}))
      ->capture_default_str();
  run->add_option("--scenario", scenario, "1 = forced islanding, 2 = switching attack")
      ->check(CLI::Range(1, 2))
      ->capture_default_str();
  run->add_option("--pacing", pacing, "lockstep or realtime")
      ->check(CLI::IsMember({"lockstep", "realtime"}))
      ->capture_default_str();
  run->add_option("--attacker", attacker, "embedded, external, or none")
      ->check(CLI::IsMember({"embedded", "external", "none"}))
      ->capture_default_str();
  run->add_option("--dt", dt, "integration step, s")->capture_default_str();
  run->add_option("--t-end", t_end, "simulated duration, s")->capture_default_str();
  run->add_option("--out", output_dir, "output directory (trace.csv, metrics.json, events.csv)");
  run->add_option("--telemetry-dest", telemetry_dest,
                  "host:port for telemetry (external attacker)");
  run->add_option("--command-listen", command_listen, "host:port to listen for commands");
  run->add_flag("--no-fault", no_fault, "skip the scripted fault (equilibrium check)");

  std::string suite_out = "runs";
  auto* suite = app.add_subcommand("suite", "run the four-case suite and summarize");
  suite->add_option("--case", case_file, "case file")->capture_default_str();
  suite->add_option("--out", suite_out, "output root directory")->capture_default_str();
  suite->add_option("--dt", dt, "integration step, s")->capture_default_str();
  suite->add_option("--t-end", t_end, "simulated duration, s")->capture_default_str();

  std::string summarize_dir;
  auto* summ = app.add_subcommand("summarize", "summarize an existing suite directory");
  summ->add_option("dir", summarize_dir, "suite output root")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto cfg = base_config(case_file, system, scenario, pacing, attacker, dt, t_end, no_fault);
      cfg.output_dir = output_dir;
      if (!telemetry_dest.empty()) cfg.telemetry_dest = netio::parse_endpoint(telemetry_dest);
      if (!command_listen.empty()) cfg.command_listen = netio::parse_endpoint(command_listen);
      auto result = harness::run_case(cfg);
      print_metrics(result.metrics);
      if (result.attack_report)
        std::printf("attacker  trigger=%.3f s t0=%.3f s commands=%zu\n",
                    result.attack_report->trigger_time, result.attack_report->attack_t0,
                    result.attack_report->commands_sent.size());
    } else if (*suite) {
      harness::RunConfig cfg;
      cfg.case_file = case_file;
      cfg.dt = dt;
      cfg.t_end = t_end;
      cfg.output_dir = suite_out;
      auto metrics = harness::run_suite(cfg);
      std::cout << harness::summarize_text(metrics);
    } else if (*summ) {
      auto metrics = harness::load_suite_metrics(summarize_dir);
      if (metrics.empty()) {
        std::cerr << "no metrics.json files under " << summarize_dir << "\n";
        return 1;
      }
      std::cout << harness::summarize_text(metrics);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
