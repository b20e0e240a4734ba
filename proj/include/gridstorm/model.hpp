#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Sparse>

namespace gridstorm::model {

using Complex = std::complex<double>;
using SparseMatrixC = Eigen::SparseMatrix<Complex>;

/// Raised on case-file syntax/schema problems. Carries line information.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& msg, int line = -1)
      : std::runtime_error(line >= 0 ? "parse error (line " + std::to_string(line) + "): " + msg
                                     : "parse error: " + msg) {}
};

/// Raised when a parsed document fails cross-reference or invariant checks.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& msg)
      : std::runtime_error("validation error: " + msg) {}
};

enum class BusKind { Slack, PV, PQ };

struct Bus {
  int id = 0;              // external bus number
  double base_kv = 345.0;
  BusKind kind = BusKind::PQ;
  double load_p_mw = 0.0;
  double load_q_mvar = 0.0;
  double shunt_b_pu = 0.0; // shunt susceptance, p.u. on system base
  double v_set = 1.0;      // |V| setpoint for PV/Slack buses
};

struct Branch {
  std::string id;
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;   // p.u. series resistance
  double x = 0.0;   // p.u. series reactance
  double b = 0.0;   // p.u. total line charging
  double tap = 1.0; // off-nominal ratio, 1.0 for lines
  bool transformer = false;
  std::optional<std::string> breaker_id;

  bool is_transformer() const { return transformer; }
};

enum class BreakerState : uint8_t { Open = 0, Closed = 1 };

struct Breaker {
  std::string id;   // e.g. "PCC-24"
  uint16_t wire_id = 0; // numeric id used on the command protocol
  std::vector<std::string> controlled_branches;
  BreakerState state = BreakerState::Closed;
  std::string label;
};

struct SynchronousMachine {
  std::string id;
  int bus = 0;
  double rating_mva = 0.0;
  double h = 5.0;              // inertia, s on machine base
  double d = 1.0;              // damping, p.u. torque per p.u. speed (machine base)
  double xdp = 0.3;            // transient reactance, p.u. machine base
  double governor_droop = 0.05;// p.u. frequency per p.u. power (machine base)
  double governor_tc = 0.5;    // s
  double p_dispatch_mw = 0.0;
  double emf = 1.0;            // internal voltage magnitude, set by initialization
};

struct GridFormingInverter {
  std::string id;
  int bus = 0;
  double rating_mva = 0.0;
  double p_set_mw = 0.0;
  double q_set_mvar = 0.0;
  double mp = 0.02;        // P-f droop, p.u./p.u. on inverter base
  double mq = 0.0;         // Q-V droop
  double filter_tc = 0.05; // power-measurement low-pass, s
  double v_set = 1.0;      // p.u.
  double x_out = 0.1;      // coupling reactance, p.u. inverter base
};

struct FaultSpec {
  std::string id;
  int bus = 0;
  Complex y_fault;      // p.u. shunt admittance on system base
  double t_on = 0.0;    // s
  double t_off = 0.0;   // s
  // The positive-sequence shunt stands in for a single-phase fault whose
  // current collapses once the bulk infeed is disconnected; the shunt is
  // applied only while the faulted bus is in the slack-connected island.
  bool bulk_fed_only = true;
};

/// Scenario overlay block carried by the case document. Describes how the
/// microgrid units are attached when a System I/II run is requested.
struct ScenarioSpec {
  int mg_bus = 24;
  double load_scale = 1.2;          // applied to mg_bus load
  double sys1_pv_mw = 150.0;
  double sys1_sync_mw = 150.0;
  double sys2_pv_mw = 210.0;
  double sys2_sync_mw = 90.0;
  double machine_rating_factor = 2.0;  // rating = factor * dispatch
  double inverter_rating_factor = 1.3; // rating = factor * p_set
  // MG unit dynamic parameters (machine/inverter base)
  double machine_h = 5.0;
  double machine_d = 1.0;
  double machine_xdp = 0.25;
  double machine_droop = 0.05;
  double machine_tc = 0.12;
  double inverter_mp = 0.02;
  double inverter_mq = 0.01;
  double inverter_filter_tc = 0.05;
  double inverter_x_out = 0.08;
  double mg_v_set = 1.0;
};

enum class SystemMix { None, I, II };

struct GridModel {
  double f_nominal_hz = 60.0;
  double s_base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Breaker> breakers;
  std::vector<SynchronousMachine> machines;
  std::vector<GridFormingInverter> inverters;
  std::vector<FaultSpec> faults;
  ScenarioSpec scenario;
  SystemMix applied_mix = SystemMix::None;

  // internal index maps, filled by validate()
  std::map<int, int> bus_index;            // bus id -> position in buses
  std::map<std::string, int> branch_index; // branch id -> position
  std::map<std::string, int> breaker_index;

  int n_buses() const { return static_cast<int>(buses.size()); }
  const Bus& bus(int bus_id) const { return buses.at(bus_index.at(bus_id)); }
  int index_of_bus(int bus_id) const { return bus_index.at(bus_id); }
  const Breaker* find_breaker(const std::string& id) const;
  const Breaker* find_breaker_wire(uint16_t wire_id) const;

  /// Checks all cross references and type invariants; fills the index maps.
  void validate();
};

using BreakerStates = std::map<std::string, BreakerState>;

BreakerStates initial_breaker_states(const GridModel& model);

struct IslandPartition {
  std::vector<std::vector<int>> islands; // bus ids per island
  std::map<int, int> island_of;          // bus id -> island index
  std::vector<bool> energized;           // island contains a machine or inverter
  std::vector<bool> has_slack;           // island contains the slack bus

  int island_of_bus(int bus_id) const { return island_of.at(bus_id); }
};

/// Parses a case document. `mix` selects the System I/II microgrid overlay;
/// SystemMix::None loads the bare network.
GridModel load_case(const std::string& case_document, SystemMix mix = SystemMix::None);
GridModel load_case_file(const std::string& path, SystemMix mix = SystemMix::None);

/// Emits a case document that load_case() round-trips to an identical model.
std::string serialize(const GridModel& model);

/// Nodal admittance matrix over all buses (model bus order). Branches whose
/// breaker is open contribute nothing; active fault shunts are added on the
/// diagonal.
SparseMatrixC build_admittance(const GridModel& model, const BreakerStates& breaker_states,
                               const std::vector<FaultSpec>& active_faults);

/// Connected components of the closed-branch graph.
IslandPartition find_islands(const GridModel& model, const BreakerStates& breaker_states);

} // namespace gridstorm::model
