#include "gridstorm/adversary.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace gridstorm::adversary {

using netio::CommandFrame;
using netio::TelemetryFrame;

namespace {

const char* mode_name(DetectorMode m) {
  switch (m) {
    case DetectorMode::Monitor: return "Monitor";
    case DetectorMode::Triggered: return "Triggered";
    case DetectorMode::Executing: return "Executing";
    default: return "Done";
  }
}

} // namespace

DetectorState observe(const TelemetryFrame& frame, DetectorState det, const DetectorConfig& cfg,
                      double f_nominal) {
  if (det.mode != DetectorMode::Monitor) return det;
  if (det.frames_seen > 0 && frame.seq <= det.last_seq) return det; // stale or replayed
  det.last_seq = frame.seq;
  ++det.frames_seen;

  if (det.frames_seen <= cfg.warmup_frames) {
    det.baseline_v += (frame.v_mag_pu - det.baseline_v) / det.frames_seen;
    return det;
  }

  bool abnormal = frame.v_mag_pu < cfg.v_drop_ratio * det.baseline_v ||
                  std::abs(frame.frequency_hz - f_nominal) > cfg.f_dev_hz;
  if (!abnormal) {
    det.consecutive_abnormal = 0;
    return det;
  }
  if (++det.consecutive_abnormal >= cfg.debounce_frames) {
    det.mode = DetectorMode::Triggered;
    det.trigger_time = static_cast<double>(frame.sim_time_us) * 1e-6;
  }
  return det;
}

std::vector<CommandFrame> plan_attack(const AttackScenario& sc, double t0) {
  if (t0 < 0) throw std::invalid_argument("plan_attack: t0 must be non-negative");
  auto us = [](double t) { return static_cast<uint64_t>(std::llround(t * 1e6)); };
  std::vector<CommandFrame> cmds;
  uint32_t seq = 1;
  auto emit = [&](double at, uint8_t action) {
    cmds.push_back(CommandFrame{seq++, sc.target_breaker, action, us(at)});
  };
  if (sc.kind == AttackKind::ForcedIslanding) {
    emit(t0, 0);
    emit(t0 + sc.t_hold, 1);
  } else {
    for (int k = 0; k < sc.cycles; ++k) {
      emit(t0 + k * sc.cycle_period, 0);
      emit(t0 + k * sc.cycle_period + sc.reclose_delay, 1);
    }
  }
  return cmds;
}

std::string format_report(const AttackReport& r, const AttackerConfig& cfg) {
  std::ostringstream out;
  out << "attack_report\n";
  out << "scenario = "
      << (cfg.scenario.kind == AttackKind::ForcedIslanding ? "islanding" : "switching") << "\n";
  out << "target_breaker = " << cfg.scenario.target_breaker << "\n";
  out << "frames_seen = " << r.frames_seen << "\n";
  out << "frames_discarded = " << r.frames_discarded << "\n";
  out << "final_mode = " << mode_name(r.final_mode) << "\n";
  out << "baseline_v = " << r.baseline_v << "\n";
  out << "trigger_time_s = " << r.trigger_time << "\n";
  out << "attack_t0_s = " << r.attack_t0 << "\n";
  out << "commands_sent = " << r.commands_sent.size() << "\n";
  for (const auto& c : r.commands_sent)
    out << "command " << c.seq << " breaker=" << c.breaker_id
        << " action=" << (c.action ? "close" : "open")
        << " execute_at_s=" << static_cast<double>(c.execute_at_us) * 1e-6 << "\n";
  return out.str();
}

AttackReport run_attacker(const AttackerConfig& cfg, std::atomic<uint16_t>* ready_port,
                          const std::atomic<bool>* stop) {
  netio::UdpSocket telemetry_sock;
  telemetry_sock.bind(cfg.telemetry_listen);
  if (ready_port) ready_port->store(telemetry_sock.local_port());
  netio::UdpSocket command_sock;

  AttackReport report;
  DetectorState det;
  auto last_frame_wall = std::chrono::steady_clock::now();
  bool contacted = false;

  auto send_commands = [&](double t0) {
    for (auto cmd : plan_attack(cfg.scenario, t0)) {
      command_sock.send_to(cfg.command_dest, netio::encode_command(cmd));
      report.commands_sent.push_back(cmd);
    }
  };

  while (!(stop && stop->load())) {
    auto datagram = telemetry_sock.recv(std::chrono::milliseconds(100));
    auto now = std::chrono::steady_clock::now();
    if (datagram.empty()) {
      double quiet = std::chrono::duration<double>(now - last_frame_wall).count();
      if (!contacted && quiet > cfg.no_contact_timeout_s)
        throw NoContactError("no telemetry within " + std::to_string(cfg.no_contact_timeout_s) +
                             " s");
      if (contacted && quiet > cfg.idle_stop_s) break; // stream ended
      continue;
    }
    last_frame_wall = now;

    TelemetryFrame frame;
    try {
      frame = netio::decode_telemetry(datagram);
    } catch (const netio::CodecError&) {
      ++report.frames_discarded;
      continue;
    }
    contacted = true;
    ++report.frames_seen;

    DetectorState before = det;
    det = observe(frame, det, cfg.detector);
    if (before.frames_seen == det.frames_seen && det.frames_seen > 0 &&
        frame.seq <= before.last_seq)
      ++report.frames_discarded;

    if (det.mode == DetectorMode::Triggered) {
      // commands go out before the ack so the simulator sees them first
      double grid = cfg.detector.attack_grid_s;
      double t0 = std::ceil(det.trigger_time / grid - 1e-9) * grid;
      if (t0 <= det.trigger_time) t0 += grid;
      report.attack_t0 = t0;
      det.mode = DetectorMode::Executing;
      send_commands(t0);
      det.mode = DetectorMode::Done;
    }

    if (cfg.send_acks)
      command_sock.send_to(cfg.command_dest, netio::encode_ack(netio::AckFrame{frame.seq}));
  }

  report.final_mode = det.mode;
  report.baseline_v = det.baseline_v;
  report.trigger_time = det.trigger_time;

  if (!cfg.report_path.empty()) {
    std::ofstream out(cfg.report_path);
    out << format_report(report, cfg);
  }
  return report;
}

} // namespace gridstorm::adversary
