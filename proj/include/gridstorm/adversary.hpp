#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridstorm/netio.hpp"

namespace gridstorm::adversary {

enum class AttackKind { ForcedIslanding, SwitchingAttack };

struct AttackScenario {
  AttackKind kind = AttackKind::ForcedIslanding;
  double t_hold = 0.5;        // islanded dwell, s (Scenario 1)
  double cycle_period = 0.2;  // s between openings (Scenario 2)
  double reclose_delay = 0.1; // s from open to re-close
  int cycles = 3;
  uint16_t target_breaker = 1;
};

struct DetectorConfig {
  double v_drop_ratio = 0.9;     // abnormal when v < ratio * baseline
  double f_dev_hz = 0.3;         // abnormal when |f - 60| exceeds this
  int debounce_frames = 5;       // consecutive abnormal frames to trigger
  int warmup_frames = 20;        // frames used to establish the voltage baseline
  double attack_grid_s = 0.1;    // trigger time rounds up to this grid
};

enum class DetectorMode { Monitor, Triggered, Executing, Done };

struct DetectorState {
  DetectorMode mode = DetectorMode::Monitor;
  double baseline_v = 0.0;  // rolling mean over the warm-up window
  int frames_seen = 0;
  int consecutive_abnormal = 0;
  double trigger_time = -1.0; // s, valid once Triggered
  uint32_t last_seq = 0;
};

/// Consumes one telemetry frame in Monitor mode: warm-up updates the voltage
/// baseline, afterwards abnormal frames are debounced into a trigger.
/// Out-of-sequence frames are discarded. Purely passive.
DetectorState observe(const netio::TelemetryFrame& frame, DetectorState det,
                      const DetectorConfig& cfg, double f_nominal = 60.0);

/// Expands a scenario into its timed command list, anchored at t0. Commands
/// strictly alternate open/close starting with open.
std::vector<netio::CommandFrame> plan_attack(const AttackScenario& scenario, double t0);

struct AttackerConfig {
  netio::Endpoint telemetry_listen; // where telemetry arrives (port 0 = ephemeral)
  netio::Endpoint command_dest;     // simulator command port
  AttackScenario scenario;
  DetectorConfig detector;
  double no_contact_timeout_s = 10.0; // give up if telemetry never arrives
  double idle_stop_s = 2.0;           // stop after telemetry goes quiet
  std::string report_path;            // empty = no report file
  bool send_acks = true;              // lockstep-sync support
};

struct AttackReport {
  uint64_t frames_seen = 0;
  uint64_t frames_discarded = 0;
  DetectorMode final_mode = DetectorMode::Monitor;
  double baseline_v = 0.0;
  double trigger_time = -1.0;
  double attack_t0 = -1.0;
  std::vector<netio::CommandFrame> commands_sent;
};

class NoContactError : public std::runtime_error {
public:
  explicit NoContactError(const std::string& msg)
      : std::runtime_error("no telemetry contact: " + msg) {}
};

std::string format_report(const AttackReport& report, const AttackerConfig& cfg);

/// Full kill chain over UDP: monitor telemetry, detect the abnormal
/// condition, fire the planned command sequence, then keep acking until the
/// stream goes quiet. `ready_port`, when given, receives the bound telemetry
/// port (embedded mode wires the simulator to it).
AttackReport run_attacker(const AttackerConfig& cfg,
                          std::atomic<uint16_t>* ready_port = nullptr,
                          const std::atomic<bool>* stop = nullptr);

} // namespace gridstorm::adversary
