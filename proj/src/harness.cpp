#include "gridstorm/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <future>
#include <memory>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "gridstorm/steady.hpp"

namespace gridstorm::harness {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kEventSlop = 1e-9;
// verdict thresholds: settling slower than this, or undervoltage dwell longer
// than this, downgrades a settled run to Marginal
constexpr double kMarginalSettle = 1.0;
constexpr double kMarginalUv = 0.3;

// shortest round-trip representation; identical bytes on every run
std::string fmt(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::runtime_error("bad numeric field '" + std::string(s) + "'");
  return v;
}

const char* event_kind_name(dynamics::EventKind k) {
  switch (k) {
    case dynamics::EventKind::BreakerOpen: return "breaker_open";
    case dynamics::EventKind::BreakerClose: return "breaker_close";
    case dynamics::EventKind::FaultOn: return "fault_on";
    default: return "fault_off";
  }
}

protection::ViolationKind violation_kind_from(const std::string& name) {
  using K = protection::ViolationKind;
  if (name == "OverFreq") return K::OverFreq;
  if (name == "UnderFreq") return K::UnderFreq;
  if (name == "OverVolt") return K::OverVolt;
  if (name == "UnderVolt") return K::UnderVolt;
  throw std::runtime_error("unknown violation kind '" + name + "'");
}

Verdict verdict_from(const std::string& name) {
  if (name == "stable") return Verdict::Stable;
  if (name == "marginal") return Verdict::Marginal;
  if (name == "unstable") return Verdict::Unstable;
  throw std::runtime_error("unknown verdict '" + name + "'");
}

int canonical_rank(const std::string& label) {
  static const std::vector<std::string> order{"sysI_scn1", "sysI_scn2", "sysII_scn1",
                                              "sysII_scn2"};
  for (size_t i = 0; i < order.size(); ++i)
    if (label.rfind(order[i], 0) == 0) return static_cast<int>(i);
  return static_cast<int>(order.size());
}

// severity for the summary's "most severe" marker
double severity(const CaseMetrics& m) {
  double s = m.uv_duration_s * 10.0 + std::abs(m.f_nadir_hz - 60.0) +
             std::abs(m.f_peak_hz - 60.0);
  if (!m.t_settle_s)
    s += 100.0;
  else
    s += *m.t_settle_s;
  if (m.verdict == Verdict::Unstable) s += 1000.0;
  return s;
}

} // namespace

std::string RunConfig::label() const {
  std::string l = "sys";
  l += system == model::SystemMix::II ? "II" : (system == model::SystemMix::I ? "I" : "0");
  l += "_scn" + std::to_string(scenario);
  if (attacker == AttackerMode::None) l += "_noattack";
  if (!include_fault) l += "_nofault";
  return l;
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Stable: return "stable";
    case Verdict::Marginal: return "marginal";
    default: return "unstable";
  }
}

CaseMetrics compute_metrics(const std::vector<TraceRow>& trace,
                            const std::vector<dynamics::SimEvent>& events,
                            const protection::ViolationLog& log, int bus, SettlingBand band) {
  if (trace.empty()) throw std::invalid_argument("compute_metrics: empty trace");
  CaseMetrics m;

  double first_at = trace.front().t;
  double last_at = trace.front().t;
  if (!events.empty()) {
    first_at = events.front().at;
    last_at = events.front().at;
    for (const auto& ev : events) {
      first_at = std::min(first_at, ev.at);
      last_at = std::max(last_at, ev.at);
    }
  }
  double window_start = first_at - 0.1;

  bool any = false;
  for (const auto& row : trace) {
    if (row.t < window_start - kEventSlop) continue;
    if (std::isnan(row.f_hz)) continue;
    if (!any) {
      m.f_nadir_hz = m.f_peak_hz = row.f_hz;
      m.v_min_pu = m.v_max_pu = row.v_pu;
      any = true;
    } else {
      m.f_nadir_hz = std::min(m.f_nadir_hz, row.f_hz);
      m.f_peak_hz = std::max(m.f_peak_hz, row.f_hz);
      m.v_min_pu = std::min(m.v_min_pu, row.v_pu);
      m.v_max_pu = std::max(m.v_max_pu, row.v_pu);
    }
  }
  if (!any) {
    m.f_nadir_hz = m.f_peak_hz = 60.0;
    m.v_min_pu = m.v_max_pu = 0.0;
  }

  // settling: first time after the final event from which |f - 60| stays
  // within the band for the full dwell through end of trace
  double settle_start = last_at;
  bool found_violation_tail = false;
  for (auto it = trace.rbegin(); it != trace.rend(); ++it) {
    if (it->t < last_at - kEventSlop) break;
    if (std::isnan(it->f_hz) || std::abs(it->f_hz - 60.0) > band.band_hz) {
      settle_start = it->t;
      found_violation_tail = true;
      break;
    }
  }
  if (found_violation_tail) {
    // settle_start currently points at the last out-of-band sample
    bool advanced = false;
    for (const auto& row : trace) {
      if (row.t > settle_start + kEventSlop) {
        settle_start = row.t;
        advanced = true;
        break;
      }
    }
    if (!advanced) settle_start = trace.back().t + 1.0; // never re-enters the band
  }
  if (trace.back().t - settle_start >= band.dwell_s - kEventSlop)
    m.t_settle_s = std::max(0.0, settle_start - last_at);

  m.uv_duration_s = log.undervoltage_duration(bus);
  m.violations = log.violations();

  if (!m.t_settle_s || log.any_frequency_violation())
    m.verdict = Verdict::Unstable;
  else if (*m.t_settle_s > kMarginalSettle || m.uv_duration_s > kMarginalUv)
    m.verdict = Verdict::Marginal;
  else
    m.verdict = Verdict::Stable;
  return m;
}

namespace {

void write_events_csv(const fs::path& path, const std::vector<dynamics::SimEvent>& events) {
  std::ofstream out(path, std::ios::binary);
  out << "t_s,kind,target,origin\n";
  for (const auto& ev : events)
    out << fmt(ev.at) << ',' << event_kind_name(ev.kind) << ',' << ev.target << ','
        << (ev.origin == dynamics::EventOrigin::Remote ? "remote" : "scripted") << '\n';
}

} // namespace

RunResult run_case(const RunConfig& cfg) {
  auto grid = model::load_case_file(cfg.case_file, cfg.system);
  auto pf = steady::solve_power_flow(grid);
  auto initial = dynamics::init_from_power_flow(grid, pf);
  dynamics::Simulator sim(grid, initial);

  protection::BreakerScheduler scheduler(grid);
  protection::ViolationLog log(cfg.limits);

  std::vector<dynamics::SimEvent> scripted;
  if (cfg.include_fault) {
    for (const auto& f : grid.faults) {
      scripted.push_back({f.t_on, dynamics::EventKind::FaultOn, f.id,
                          dynamics::EventOrigin::Scripted});
      scripted.push_back({f.t_off, dynamics::EventKind::FaultOff, f.id,
                          dynamics::EventOrigin::Scripted});
    }
  }
  std::sort(scripted.begin(), scripted.end(),
            [](const auto& a, const auto& b) { return a.at < b.at; });

  const std::string pcc_id = grid.breakers.empty() ? std::string() : grid.breakers.front().id;

  // network link + embedded adversary
  std::unique_ptr<netio::SimulatorLink> link;
  std::thread attacker_thread;
  std::atomic<bool> attacker_stop{false};
  std::atomic<uint16_t> attacker_port{0};
  std::exception_ptr attacker_error;
  std::future<adversary::AttackReport> report_future;
  RunResult result;

  if (cfg.attacker != AttackerMode::None) {
    netio::SimulatorLink::Config lcfg;
    lcfg.lockstep_sync = cfg.pacing == Pacing::Lockstep;
    if (cfg.attacker == AttackerMode::External) {
      lcfg.telemetry_dest = cfg.telemetry_dest;
      lcfg.command_listen = cfg.command_listen;
    } else {
      lcfg.command_listen = {"127.0.0.1", 0};
    }
    link = std::make_unique<netio::SimulatorLink>(lcfg);

    if (cfg.attacker == AttackerMode::Embedded) {
      adversary::AttackerConfig acfg;
      acfg.telemetry_listen = {"127.0.0.1", 0};
      acfg.command_dest = {"127.0.0.1", link->command_port()};
      acfg.scenario.kind = cfg.scenario == 2 ? adversary::AttackKind::SwitchingAttack
                                             : adversary::AttackKind::ForcedIslanding;
      if (!grid.breakers.empty()) acfg.scenario.target_breaker = grid.breakers.front().wire_id;
      acfg.idle_stop_s = 0.5;
      acfg.send_acks = lcfg.lockstep_sync;
      if (!cfg.output_dir.empty())
        acfg.report_path = (fs::path(cfg.output_dir) / "attacker_report.txt").string();

      std::promise<adversary::AttackReport> report_promise;
      report_future = report_promise.get_future();
      attacker_thread = std::thread([acfg, &attacker_port, &attacker_stop,
                                     p = std::move(report_promise)]() mutable {
        try {
          p.set_value(adversary::run_attacker(acfg, &attacker_port, &attacker_stop));
        } catch (...) {
          p.set_exception(std::current_exception());
        }
      });
      while (attacker_port.load() == 0) std::this_thread::sleep_for(std::chrono::microseconds(50));
      link->set_telemetry_dest({"127.0.0.1", attacker_port.load()});
    }
  }

  if (!cfg.output_dir.empty()) fs::create_directories(cfg.output_dir);

  const int trace_bus = cfg.monitored_buses.empty() ? 0 : cfg.monitored_buses.front();
  const long n_steps = std::lround(cfg.t_end / cfg.dt);
  result.trace.reserve(static_cast<size_t>(n_steps) + 1);

  auto sample_row = [&](double t) {
    TraceRow row;
    row.t = t;
    const auto& st = sim.state();
    if (trace_bus != 0) {
      int bi = grid.index_of_bus(trace_bus);
      row.f_hz = st.f_est_hz[bi];
      row.v_pu = std::abs(st.v[bi]);
      row.v_ang_rad = std::arg(st.v[bi]);
      auto s = sim.bus_injection_mva(trace_bus);
      row.p_mw = s.real();
      row.q_mvar = s.imag();
    }
    row.breaker = !pcc_id.empty() && sim.pcc_closed(pcc_id) ? 1 : 0;
    row.fault = 0;
    for (uint8_t on : st.fault_on)
      if (on) row.fault = 1;
    return row;
  };

  result.trace.push_back(sample_row(0.0));

  size_t scripted_next = 0;
  uint32_t frame_seq = 0;
  auto wall_start = std::chrono::steady_clock::now();

  for (long k = 0; k < n_steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;

    if (link) {
      while (auto cmd = link->poll_command()) {
        const model::Breaker* bk = grid.find_breaker_wire(cmd->breaker_id);
        if (!bk) continue; // unknown breaker: ignore (logged via link stats only on decode)
        protection::BreakerCommand bc;
        bc.seq = cmd->seq;
        bc.breaker_id = bk->id;
        bc.close = cmd->action == 1;
        bc.execute_at = static_cast<double>(cmd->execute_at_us) * 1e-6;
        bc.origin = dynamics::EventOrigin::Remote;
        scheduler.schedule(bc, t, cfg.dt);
      }
    }

    std::vector<dynamics::SimEvent> due;
    while (scripted_next < scripted.size() && scripted[scripted_next].at <= t + kEventSlop)
      due.push_back(scripted[scripted_next++]);
    for (auto& ev : scheduler.collect_due(t)) due.push_back(std::move(ev));

    sim.step(cfg.dt, due);
    for (auto& ev : due) result.applied_events.push_back(std::move(ev));

    const double t_next = static_cast<double>(k + 1) * cfg.dt;
    result.trace.push_back(sample_row(t_next));

    for (int bus : cfg.monitored_buses) {
      int bi = grid.index_of_bus(bus);
      log.check_limits({bus, t_next, sim.state().f_est_hz[bi], std::abs(sim.state().v[bi])});
    }

    if (link && (k + 1) % cfg.publish_interval == 0) {
      for (int bus : cfg.monitored_buses) {
        int bi = grid.index_of_bus(bus);
        netio::TelemetryFrame frame;
        frame.seq = ++frame_seq;
        frame.sim_time_us = static_cast<uint64_t>(std::llround(t_next * 1e6));
        frame.bus_id = static_cast<uint16_t>(bus);
        frame.island_id = static_cast<uint16_t>(sim.islands().island_of_bus(bus));
        frame.frequency_hz = sim.state().f_est_hz[bi];
        frame.v_mag_pu = std::abs(sim.state().v[bi]);
        frame.v_ang_rad = std::arg(sim.state().v[bi]);
        auto s = sim.bus_injection_mva(bus);
        frame.p_mw = s.real();
        frame.q_mvar = s.imag();
        frame.breaker_state = result.trace.back().breaker;
        frame.fault_flag = result.trace.back().fault;
        link->publish(frame);
      }
    }

    if (cfg.pacing == Pacing::RealTime)
      std::this_thread::sleep_until(wall_start + std::chrono::duration_cast<
                                                     std::chrono::steady_clock::duration>(
                                                     std::chrono::duration<double>(t_next)));
  }

  log.finalize(cfg.t_end);

  if (attacker_thread.joinable()) {
    attacker_stop.store(true);
    attacker_thread.join();
    try {
      result.attack_report = report_future.get();
    } catch (...) {
      attacker_error = std::current_exception();
    }
  }
  if (link) result.link_stats = &link->stats();

  result.metrics = compute_metrics(result.trace, result.applied_events, log, trace_bus);
  result.metrics.label = cfg.label();

  if (!cfg.output_dir.empty()) {
    fs::path dir(cfg.output_dir);
    write_trace_csv(dir / "trace.csv", result.trace);
    write_metrics_json(dir / "metrics.json", result.metrics);
    write_events_csv(dir / "events.csv", result.applied_events);
  }

  result.link_stats = nullptr; // link is destroyed on return
  if (attacker_error) std::rethrow_exception(attacker_error);
  return result;
}

std::vector<CaseMetrics> run_suite(RunConfig base) {
  std::vector<CaseMetrics> all;
  const fs::path root = base.output_dir.empty() ? fs::path("runs") : fs::path(base.output_dir);
  for (auto system : {model::SystemMix::I, model::SystemMix::II}) {
    for (int scenario : {1, 2}) {
      RunConfig cfg = base;
      cfg.system = system;
      cfg.scenario = scenario;
      cfg.attacker = AttackerMode::Embedded;
      cfg.output_dir = (root / cfg.label()).string();
      all.push_back(run_case(cfg).metrics);
    }
  }
  {
    std::ofstream out(root / "summary.txt", std::ios::binary);
    out << summarize_text(all);
  }
  {
    std::ofstream out(root / "summary.json", std::ios::binary);
    out << summarize_json(all) << '\n';
  }
  return all;
}

std::string summarize_text(const std::vector<CaseMetrics>& metrics) {
  std::vector<CaseMetrics> rows = metrics;
  std::sort(rows.begin(), rows.end(), [](const CaseMetrics& a, const CaseMetrics& b) {
    int ra = canonical_rank(a.label), rb = canonical_rank(b.label);
    return ra != rb ? ra < rb : a.label < b.label;
  });

  size_t worst = 0;
  for (size_t i = 1; i < rows.size(); ++i)
    if (severity(rows[i]) > severity(rows[worst])) worst = i;

  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %10s %10s %10s %8s %8s  %s\n", "case", "f_nadir",
                "f_peak", "t_settle", "v_min", "uv_dur", "verdict");
  out << line;
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& m = rows[i];
    char settle[24];
    if (m.t_settle_s)
      std::snprintf(settle, sizeof settle, "%.3f", *m.t_settle_s);
    else
      std::snprintf(settle, sizeof settle, "-");
    std::snprintf(line, sizeof line, "%-12s %10.4f %10.4f %10s %8.4f %8.3f  %s%s\n",
                  m.label.c_str(), m.f_nadir_hz, m.f_peak_hz, settle, m.v_min_pu,
                  m.uv_duration_s, verdict_name(m.verdict),
                  rows.size() > 1 && i == worst ? "  <- most severe" : "");
    out << line;
  }
  return out.str();
}

namespace {

json metrics_to_json(const CaseMetrics& m) {
  json j;
  j["label"] = m.label;
  j["f_nadir_hz"] = m.f_nadir_hz;
  j["f_peak_hz"] = m.f_peak_hz;
  if (m.t_settle_s)
    j["t_settle_s"] = *m.t_settle_s;
  else
    j["t_settle_s"] = nullptr;
  j["v_min_pu"] = m.v_min_pu;
  j["v_max_pu"] = m.v_max_pu;
  j["uv_duration_s"] = m.uv_duration_s;
  j["verdict"] = verdict_name(m.verdict);
  json viols = json::array();
  for (const auto& v : m.violations) {
    viols.push_back({{"kind", protection::violation_kind_name(v.kind)},
                     {"bus", v.bus},
                     {"t_start", v.t_start},
                     {"t_end", v.t_end},
                     {"extremum", v.extremum}});
  }
  j["violations"] = viols;
  return j;
}

CaseMetrics metrics_from_json(const json& j) {
  CaseMetrics m;
  m.label = j.at("label").get<std::string>();
  m.f_nadir_hz = j.at("f_nadir_hz").get<double>();
  m.f_peak_hz = j.at("f_peak_hz").get<double>();
  if (!j.at("t_settle_s").is_null()) m.t_settle_s = j.at("t_settle_s").get<double>();
  m.v_min_pu = j.at("v_min_pu").get<double>();
  m.v_max_pu = j.at("v_max_pu").get<double>();
  m.uv_duration_s = j.at("uv_duration_s").get<double>();
  m.verdict = verdict_from(j.at("verdict").get<std::string>());
  for (const auto& v : j.at("violations")) {
    protection::Violation viol;
    viol.kind = violation_kind_from(v.at("kind").get<std::string>());
    viol.bus = v.at("bus").get<int>();
    viol.t_start = v.at("t_start").get<double>();
    viol.t_end = v.at("t_end").get<double>();
    viol.extremum = v.at("extremum").get<double>();
    m.violations.push_back(viol);
  }
  return m;
}

} // namespace

std::string summarize_json(const std::vector<CaseMetrics>& metrics) {
  std::vector<CaseMetrics> rows = metrics;
  std::sort(rows.begin(), rows.end(), [](const CaseMetrics& a, const CaseMetrics& b) {
    int ra = canonical_rank(a.label), rb = canonical_rank(b.label);
    return ra != rb ? ra < rb : a.label < b.label;
  });
  json j = json::array();
  for (const auto& m : rows) j.push_back(metrics_to_json(m));
  return j.dump(2);
}

std::vector<CaseMetrics> load_suite_metrics(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "metrics.json"))
      files.push_back(entry.path() / "metrics.json");
  }
  std::sort(files.begin(), files.end());
  std::vector<CaseMetrics> out;
  for (const auto& f : files) out.push_back(read_metrics_json(f));
  return out;
}

void write_trace_csv(const fs::path& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "t_s,f_hz,v_pu,v_ang_rad,p_mw,q_mvar,breaker,fault\n";
  for (const auto& r : trace)
    out << fmt(r.t) << ',' << fmt(r.f_hz) << ',' << fmt(r.v_pu) << ',' << fmt(r.v_ang_rad) << ','
        << fmt(r.p_mw) << ',' << fmt(r.q_mvar) << ',' << int(r.breaker) << ',' << int(r.fault)
        << '\n';
}

std::vector<TraceRow> read_trace_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line); // header
  std::vector<TraceRow> trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view sv = line;
    size_t pos = 0;
    while (true) {
      size_t comma = sv.find(',', pos);
      fields.push_back(sv.substr(pos, comma - pos));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (fields.size() != 8) throw std::runtime_error("trace row with " +
                                                     std::to_string(fields.size()) + " fields");
    TraceRow r;
    r.t = parse_double(fields[0]);
    r.f_hz = parse_double(fields[1]);
    r.v_pu = parse_double(fields[2]);
    r.v_ang_rad = parse_double(fields[3]);
    r.p_mw = parse_double(fields[4]);
    r.q_mvar = parse_double(fields[5]);
    r.breaker = static_cast<uint8_t>(parse_double(fields[6]));
    r.fault = static_cast<uint8_t>(parse_double(fields[7]));
    trace.push_back(r);
  }
  return trace;
}

void write_metrics_json(const fs::path& path, const CaseMetrics& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << metrics_to_json(m).dump(2) << '\n';
}

CaseMetrics read_metrics_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  json j;
  in >> j;
  return metrics_from_json(j);
}

} // namespace gridstorm::harness
