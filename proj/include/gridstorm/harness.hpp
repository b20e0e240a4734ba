#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gridstorm/adversary.hpp"
#include "gridstorm/dynamics.hpp"
#include "gridstorm/model.hpp"
#include "gridstorm/netio.hpp"
#include "gridstorm/protection.hpp"

namespace gridstorm::harness {

enum class Pacing { Lockstep, RealTime };
enum class AttackerMode { External, Embedded, None };

struct RunConfig {
  std::string case_file;
  model::SystemMix system = model::SystemMix::I;
  int scenario = 1; // 1 = forced islanding, 2 = switching attack
  double dt = 1e-3;
  double t_end = 3.0;
  Pacing pacing = Pacing::Lockstep;
  AttackerMode attacker = AttackerMode::Embedded;
  uint64_t seed = 0; // reserved: runs are deterministic
  std::string output_dir;
  bool include_fault = true;
  std::vector<int> monitored_buses{24};
  int publish_interval = 10; // steps between telemetry frames
  // External-attacker endpoints (Embedded wires itself over loopback)
  netio::Endpoint telemetry_dest{"127.0.0.1", 7401};
  netio::Endpoint command_listen{"0.0.0.0", 7402};
  protection::ProtectionLimits limits;

  std::string label() const;
};

struct TraceRow {
  double t = 0.0;
  double f_hz = 0.0;
  double v_pu = 0.0;
  double v_ang_rad = 0.0;
  double p_mw = 0.0;
  double q_mvar = 0.0;
  uint8_t breaker = 1; // PCC state
  uint8_t fault = 0;
};

enum class Verdict { Stable, Marginal, Unstable };
const char* verdict_name(Verdict v);

struct CaseMetrics {
  std::string label;
  double f_nadir_hz = 0.0;
  double f_peak_hz = 0.0;
  std::optional<double> t_settle_s; // unset when the run never settles
  double v_min_pu = 0.0;
  double v_max_pu = 0.0;
  double uv_duration_s = 0.0;
  std::vector<protection::Violation> violations;
  Verdict verdict = Verdict::Stable;
};

struct RunResult {
  CaseMetrics metrics;
  std::vector<TraceRow> trace; // bus-24 (first monitored bus) time series
  std::vector<dynamics::SimEvent> applied_events;
  std::optional<adversary::AttackReport> attack_report; // Embedded mode only
  netio::LinkStats const* link_stats = nullptr;          // valid during run only
};

struct SettlingBand {
  double band_hz = 0.02;
  double dwell_s = 0.2;
};

/// Derives the per-run summary from a recorded trace. Nadir/peak are taken
/// from [first event - 0.1 s, end]; settling is measured after the final
/// event against the +/-band sustained for the dwell.
CaseMetrics compute_metrics(const std::vector<TraceRow>& trace,
                            const std::vector<dynamics::SimEvent>& events,
                            const protection::ViolationLog& log, int bus,
                            SettlingBand band = {});

/// Runs one configured case end to end: power flow, initialization, the
/// timed loop with fault/attack events, telemetry, protection monitoring,
/// trace capture, metrics, and output files under cfg.output_dir.
RunResult run_case(const RunConfig& cfg);

/// Four-case paper suite (System I/II x Scenario 1/2) plus summary files.
std::vector<CaseMetrics> run_suite(RunConfig base);

/// Table-style summary of the four cases: aligned text plus JSON.
std::string summarize_text(const std::vector<CaseMetrics>& metrics);
std::string summarize_json(const std::vector<CaseMetrics>& metrics);

/// Re-reads per-case metrics JSON files from a suite output directory.
std::vector<CaseMetrics> load_suite_metrics(const std::filesystem::path& dir);

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace);
std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path);
void write_metrics_json(const std::filesystem::path& path, const CaseMetrics& m);
CaseMetrics read_metrics_json(const std::filesystem::path& path);

} // namespace gridstorm::harness
