#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridstorm/model.hpp"
#include "gridstorm/steady.hpp"

namespace gridstorm::dynamics {

class SimulationDiverged : public std::runtime_error {
public:
  explicit SimulationDiverged(const std::string& msg)
      : std::runtime_error("simulation diverged: " + msg) {}
};

class InitError : public std::runtime_error {
public:
  explicit InitError(const std::string& msg) : std::runtime_error("initialization: " + msg) {}
};

enum class EventKind { BreakerOpen, BreakerClose, FaultOn, FaultOff };
enum class EventOrigin { Scripted, Remote };

struct SimEvent {
  double at = 0.0;          // s
  EventKind kind = EventKind::BreakerOpen;
  std::string target;       // breaker or fault id
  EventOrigin origin = EventOrigin::Scripted;
};

struct MachineState {
  double delta = 0.0;   // rotor angle, rad, synchronous frame
  double omega = 1.0;   // p.u. speed
  double p_mech = 0.0;  // p.u. machine base
  double p_gov_ref = 0.0;
  double emf = 1.0;     // internal voltage magnitude, p.u.
};

struct InverterState {
  double theta = 0.0;   // droop angle, rad, synchronous frame
  double p_filt = 0.0;  // p.u. inverter base
  double q_filt = 0.0;
  // references reconciled at initialization so the droop laws sit at equilibrium
  double p_ref = 0.0;
  double q_ref = 0.0;
  double v_ref = 1.0;
};

struct DynamicState {
  double t = 0.0;
  std::vector<MachineState> machines;   // parallel to model.machines
  std::vector<InverterState> inverters; // parallel to model.inverters
  Eigen::VectorXcd v;                   // bus phasors, model order
  Eigen::VectorXd f_est_hz;             // per bus; NaN on de-energized buses
  model::BreakerStates breaker_states;
  std::vector<uint8_t> fault_on;        // per model fault, timed on/off flag
  Eigen::VectorXcd load_y;              // constant-Z loads frozen at init, system base
};

/// Droop law: f = f0 * (1 - mp * (p_filt - p_set)), powers on inverter base.
double inverter_frequency(double p_filt, double p_set, double mp, double f0 = 60.0);

/// One-shot bus-frequency estimate from an unwrapped angle history sampled at
/// dt, smoothed by a first-order low-pass (time constant tau).
double estimate_bus_frequency(std::span<const double> angle_history, double dt,
                              double tau = 0.02, double f0 = 60.0);

/// Back-solves machine EMFs, governor references, and inverter droop
/// references from a converged power flow. The result is an exact fixed
/// point of Simulator::step with no events.
DynamicState init_from_power_flow(const model::GridModel& model,
                                  const steady::PowerFlowSolution& pf);

/// Fixed-step RK4 time-domain simulator. Single-threaded and deterministic:
/// identical model, state, events, and dt give a bitwise-identical trajectory.
class Simulator {
public:
  static constexpr double kFreqFilterTc = 0.02; // s, bus-frequency low-pass

  Simulator(const model::GridModel& model, DynamicState initial);

  const DynamicState& state() const { return state_; }
  const model::GridModel& grid() const { return model_; }
  const model::IslandPartition& islands() const { return islands_; }

  /// Applies due events at the step boundary, advances one RK4 step, solves
  /// the network, and updates per-bus frequency estimates.
  void step(double dt, std::span<const SimEvent> due_events);

  /// Electrical output of machine/inverter i at the current state, MW/Mvar.
  model::Complex machine_output_mva(size_t i) const;
  model::Complex inverter_output_mva(size_t i) const;

  /// Net source injection minus load at a bus, MW/Mvar (telemetry quantity).
  model::Complex bus_injection_mva(int bus_id) const;

  /// Sum over an island of source electrical power minus load and network
  /// losses, p.u.; zero up to roundoff (power-balance diagnostic).
  double island_power_imbalance(int island_index) const;

  bool pcc_closed(const std::string& breaker_id) const;

private:
  struct Derivatives;

  void rebuild_topology();
  std::vector<model::FaultSpec> effective_faults() const;
  Eigen::VectorXcd solve_network(const std::vector<MachineState>& ms,
                                 const std::vector<InverterState>& is) const;
  Derivatives derivatives(const std::vector<MachineState>& ms,
                          const std::vector<InverterState>& is) const;
  void apply_event(const SimEvent& ev);
  void absorb_angle_jumps();
  void update_frequency_estimates(double dt);

  const model::GridModel& model_;
  DynamicState state_;
  model::IslandPartition islands_;
  Eigen::MatrixXcd ydyn_;       // network + loads + source shunts + faults
  std::vector<std::vector<int>> island_rows_; // bus indices per energized island
  std::vector<Eigen::PartialPivLU<Eigen::MatrixXcd>> island_lu_;
  std::vector<int> island_slot_; // island index -> slot in island_rows_/lu_ or -1
  // washout-filter frequency estimator: f = f0 + washout/(2*pi*tau); the
  // filter state is continuous across event-step angle jumps, so topology
  // changes appear as sharp dt-independent transients that decay with tau
  Eigen::VectorXd prev_ang_;     // bus voltage angles at previous sample
  Eigen::VectorXd washout_;      // unwrapped angle minus its low-passed value
  std::vector<uint8_t> prev_valid_;
  double omega_s_;               // 2*pi*f0
};

} // namespace gridstorm::dynamics
