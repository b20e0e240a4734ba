#include <charconv>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "gridstorm/adversary.hpp"

int main(int argc, char** argv) {
  using namespace gridstorm;

  CLI::App app{"attacker: passive telemetry monitor that fires breaker commands on trigger"};

  std::string scenario = "islanding";
  std::string target = "PCC-24";
  uint16_t target_id = 1;
  std::string telemetry = "0.0.0.0:7401";
  std::string command = "127.0.0.1:7402";
  std::string report;
  double no_contact = 10.0;
  double idle_stop = 2.0;
  bool no_acks = false;

  app.add_option("--scenario", scenario, "islanding or switching")
      ->check(CLI::IsMember({"islanding", "switching"}))
      ->capture_default_str();
  app.add_option("--target", target, "breaker name or numeric wire id")->capture_default_str();
  app.add_option("--target-id", target_id, "breaker wire id (overrides --target)")
      ->capture_default_str();
  app.add_option("--telemetry", telemetry, "host:port to listen for telemetry")
      ->capture_default_str();
  app.add_option("--command", command, "host:port of the simulator command listener")
      ->capture_default_str();
  app.add_option("--report", report, "write a structured report here");
  app.add_option("--no-contact-timeout", no_contact, "give up after this many quiet seconds")
      ->capture_default_str();
  app.add_option("--idle-stop", idle_stop, "stop after the stream goes quiet, s")
      ->capture_default_str();
  app.add_flag("--no-acks", no_acks, "do not acknowledge telemetry frames");

  CLI11_PARSE(app, argc, argv);

  adversary::AttackerConfig cfg;
  try {
    cfg.telemetry_listen = netio::parse_endpoint(telemetry);
    cfg.command_dest = netio::parse_endpoint(command);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  cfg.scenario.kind = scenario == "switching" ? adversary::AttackKind::SwitchingAttack
                                              : adversary::AttackKind::ForcedIslanding;
  // --target accepts a bare wire id; names fall back to --target-id (default 1)
  uint16_t parsed = 0;
  auto [p, ec] = std::from_chars(target.data(), target.data() + target.size(), parsed);
  cfg.scenario.target_breaker =
      (ec == std::errc() && p == target.data() + target.size()) ? parsed : target_id;
  cfg.no_contact_timeout_s = no_contact;
  cfg.idle_stop_s = idle_stop;
  cfg.report_path = report;
  cfg.send_acks = !no_acks;

  try {
    auto rep = adversary::run_attacker(cfg);
    std::cout << adversary::format_report(rep, cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
