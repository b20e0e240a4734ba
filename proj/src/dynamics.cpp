#include "gridstorm/dynamics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace gridstorm::dynamics {

using model::BreakerState;
using model::Complex;
using model::GridModel;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double a) {
  while (a > std::numbers::pi) a -= kTwoPi;
  while (a < -std::numbers::pi) a += kTwoPi;
  return a;
}

} // namespace

double inverter_frequency(double p_filt, double p_set, double mp, double f0) {
  if (mp <= 0) throw std::invalid_argument("inverter_frequency: mp must be positive");
  return f0 * (1.0 - mp * (p_filt - p_set));
}

double estimate_bus_frequency(std::span<const double> angle_history, double dt, double tau,
                              double f0) {
  if (angle_history.size() < 2) throw std::invalid_argument("need at least 2 angle samples");
  const double alpha = 1.0 - std::exp(-dt / tau);
  double f = f0;
  for (size_t i = 1; i < angle_history.size(); ++i) {
    double raw = f0 + (angle_history[i] - angle_history[i - 1]) / (kTwoPi * dt);
    f += alpha * (raw - f);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Initialization

DynamicState init_from_power_flow(const GridModel& m, const steady::PowerFlowSolution& pf) {
  const int n = m.n_buses();
  DynamicState st;
  st.t = 0.0;
  st.breaker_states = model::initial_breaker_states(m);
  st.fault_on.assign(m.faults.size(), 0);
  st.v.resize(n);
  for (int i = 0; i < n; ++i) st.v[i] = pf.voltage(i);
  st.f_est_hz = Eigen::VectorXd::Constant(n, m.f_nominal_hz);

  // constant-impedance loads frozen at the power-flow point
  st.load_y = Eigen::VectorXcd::Zero(n);
  for (int i = 0; i < n; ++i) {
    Complex s_load(m.buses[i].load_p_mw / m.s_base_mva, m.buses[i].load_q_mvar / m.s_base_mva);
    if (s_load != 0.0) st.load_y[i] = std::conj(s_load) / std::norm(st.v[i]);
  }

  // generation per bus: P from dispatch (slack takes the balance), Q from the
  // power-flow solution; both shared among co-located sources by rating
  Eigen::VectorXd gen_p = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd gen_q = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd rating_sum = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    gen_p[i] = pf.p_inj[i] + m.buses[i].load_p_mw;
    gen_q[i] = pf.q_inj[i] + m.buses[i].load_q_mvar;
  }
  for (const auto& g : m.machines) rating_sum[m.index_of_bus(g.bus)] += g.rating_mva;
  for (const auto& inv : m.inverters) rating_sum[m.index_of_bus(inv.bus)] += inv.rating_mva;

  auto source_share = [&](int bus_idx, double rating, double p_nominal,
                          bool slack) -> Complex {
    double q = gen_q[bus_idx] * rating / rating_sum[bus_idx];
    double p = slack ? gen_p[bus_idx] * rating / rating_sum[bus_idx] : p_nominal;
    return Complex(p, q) / m.s_base_mva;
  };

  st.machines.resize(m.machines.size());
  for (size_t k = 0; k < m.machines.size(); ++k) {
    const auto& g = m.machines[k];
    int bi = m.index_of_bus(g.bus);
    bool slack = m.buses[bi].kind == model::BusKind::Slack;
    Complex s = source_share(bi, g.rating_mva, g.p_dispatch_mw, slack);
    Complex v = st.v[bi];
    Complex i_term = std::conj(s / v);
    double ratio = g.rating_mva / m.s_base_mva;
    if (std::abs(i_term) / ratio > 1.2)
      throw InitError("machine " + g.id + " current " + std::to_string(std::abs(i_term) / ratio) +
                      " p.u. exceeds rating");
    Complex e = v + Complex(0.0, g.xdp / ratio) * i_term;
    auto& ms = st.machines[k];
    ms.emf = std::abs(e);
    ms.delta = std::arg(e);
    ms.omega = 1.0;
    ms.p_mech = (e * std::conj(i_term)).real() / ratio;
    ms.p_gov_ref = ms.p_mech;
  }

  st.inverters.resize(m.inverters.size());
  for (size_t k = 0; k < m.inverters.size(); ++k) {
    const auto& inv = m.inverters[k];
    int bi = m.index_of_bus(inv.bus);
    bool slack = m.buses[bi].kind == model::BusKind::Slack;
    Complex s = source_share(bi, inv.rating_mva, inv.p_set_mw, slack);
    Complex v = st.v[bi];
    Complex i_term = std::conj(s / v);
    double ratio = inv.rating_mva / m.s_base_mva;
    Complex e = v + Complex(0.0, inv.x_out / ratio) * i_term;
    auto& is = st.inverters[k];
    is.theta = std::arg(e);
    is.p_filt = (v * std::conj(i_term)).real() / ratio;
    is.q_filt = (v * std::conj(i_term)).imag() / ratio;
    is.p_ref = is.p_filt; // droop sits at its set-point
    is.q_ref = is.q_filt;
    is.v_ref = std::abs(e);
  }
  return st;
}

// ---------------------------------------------------------------------------
// Simulator

struct Simulator::Derivatives {
  std::vector<std::array<double, 3>> machine; // d(delta, omega, p_mech)
  std::vector<std::array<double, 3>> inverter; // d(theta, p_filt, q_filt)
};

Simulator::Simulator(const GridModel& model, DynamicState initial)
    : model_(model), state_(std::move(initial)), omega_s_(kTwoPi * model.f_nominal_hz) {
  prev_ang_ = Eigen::VectorXd::Zero(model_.n_buses());
  washout_ = Eigen::VectorXd::Zero(model_.n_buses());
  prev_valid_.assign(model_.n_buses(), 0);
  rebuild_topology();
  // establish the angle baseline for frequency estimation
  state_.v = solve_network(state_.machines, state_.inverters);
  for (int i = 0; i < model_.n_buses(); ++i) {
    if (std::abs(state_.v[i]) > 0) {
      prev_ang_[i] = std::arg(state_.v[i]);
      prev_valid_[i] = 1;
    }
  }
}

std::vector<model::FaultSpec> Simulator::effective_faults() const {
  std::vector<model::FaultSpec> out;
  for (size_t j = 0; j < model_.faults.size(); ++j) {
    if (!state_.fault_on[j]) continue;
    const auto& f = model_.faults[j];
    if (f.bulk_fed_only && !islands_.has_slack[islands_.island_of.at(f.bus)]) continue;
    out.push_back(f);
  }
  return out;
}

void Simulator::rebuild_topology() {
  islands_ = model::find_islands(model_, state_.breaker_states);
  const int n = model_.n_buses();

  ydyn_ = Eigen::MatrixXcd(model::build_admittance(model_, state_.breaker_states,
                                                   effective_faults()));
  for (int i = 0; i < n; ++i) ydyn_(i, i) += state_.load_y[i];
  for (const auto& g : model_.machines) {
    int bi = model_.index_of_bus(g.bus);
    ydyn_(bi, bi) += 1.0 / Complex(0.0, g.xdp * model_.s_base_mva / g.rating_mva);
  }
  for (const auto& inv : model_.inverters) {
    int bi = model_.index_of_bus(inv.bus);
    ydyn_(bi, bi) += 1.0 / Complex(0.0, inv.x_out * model_.s_base_mva / inv.rating_mva);
  }

  island_rows_.clear();
  island_lu_.clear();
  island_slot_.assign(islands_.islands.size(), -1);
  for (size_t isl = 0; isl < islands_.islands.size(); ++isl) {
    if (!islands_.energized[isl]) continue;
    std::vector<int> rows;
    rows.reserve(islands_.islands[isl].size());
    for (int bus_id : islands_.islands[isl]) rows.push_back(model_.index_of_bus(bus_id));
    Eigen::MatrixXcd block(rows.size(), rows.size());
    for (size_t a = 0; a < rows.size(); ++a)
      for (size_t b = 0; b < rows.size(); ++b) block(a, b) = ydyn_(rows[a], rows[b]);
    island_slot_[isl] = static_cast<int>(island_rows_.size());
    island_rows_.push_back(std::move(rows));
    island_lu_.emplace_back(block);
  }
}

Eigen::VectorXcd Simulator::solve_network(const std::vector<MachineState>& ms,
                                          const std::vector<InverterState>& is) const {
  const int n = model_.n_buses();
  Eigen::VectorXcd inj = Eigen::VectorXcd::Zero(n);
  for (size_t k = 0; k < model_.machines.size(); ++k) {
    const auto& g = model_.machines[k];
    Complex y(0.0, -1.0 / (g.xdp * model_.s_base_mva / g.rating_mva));
    inj[model_.index_of_bus(g.bus)] += std::polar(ms[k].emf, ms[k].delta) * y;
  }
  for (size_t k = 0; k < model_.inverters.size(); ++k) {
    const auto& inv = model_.inverters[k];
    Complex y(0.0, -1.0 / (inv.x_out * model_.s_base_mva / inv.rating_mva));
    double e = is[k].v_ref - inv.mq * (is[k].q_filt - is[k].q_ref);
    inj[model_.index_of_bus(inv.bus)] += std::polar(e, is[k].theta) * y;
  }

  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n);
  for (size_t slot = 0; slot < island_rows_.size(); ++slot) {
    const auto& rows = island_rows_[slot];
    Eigen::VectorXcd rhs(rows.size());
    for (size_t a = 0; a < rows.size(); ++a) rhs[a] = inj[rows[a]];
    Eigen::VectorXcd sol = island_lu_[slot].solve(rhs);
    if (!sol.allFinite())
      throw SimulationDiverged("singular network system in energized island at t=" +
                               std::to_string(state_.t));
    for (size_t a = 0; a < rows.size(); ++a) v[rows[a]] = sol[a];
  }
  return v;
}

Simulator::Derivatives Simulator::derivatives(const std::vector<MachineState>& ms,
                                              const std::vector<InverterState>& is) const {
  Eigen::VectorXcd v = solve_network(ms, is);
  Derivatives d;
  d.machine.resize(ms.size());
  d.inverter.resize(is.size());

  for (size_t k = 0; k < model_.machines.size(); ++k) {
    const auto& g = model_.machines[k];
    double ratio = g.rating_mva / model_.s_base_mva;
    Complex e = std::polar(ms[k].emf, ms[k].delta);
    Complex i_out = (e - v[model_.index_of_bus(g.bus)]) / Complex(0.0, g.xdp / ratio);
    double p_e = (e * std::conj(i_out)).real() / ratio;
    double dw = ms[k].omega - 1.0;
    d.machine[k] = {omega_s_ * dw,
                    (ms[k].p_mech - p_e - g.d * dw) / (2.0 * g.h),
                    (ms[k].p_gov_ref - dw / g.governor_droop - ms[k].p_mech) / g.governor_tc};
  }
  for (size_t k = 0; k < model_.inverters.size(); ++k) {
    const auto& inv = model_.inverters[k];
    double ratio = inv.rating_mva / model_.s_base_mva;
    double e_mag = is[k].v_ref - inv.mq * (is[k].q_filt - is[k].q_ref);
    Complex e = std::polar(e_mag, is[k].theta);
    Complex vb = v[model_.index_of_bus(inv.bus)];
    Complex i_out = (e - vb) / Complex(0.0, inv.x_out / ratio);
    Complex s_term = vb * std::conj(i_out) / ratio;
    d.inverter[k] = {-omega_s_ * inv.mp * (is[k].p_filt - is[k].p_ref),
                     (s_term.real() - is[k].p_filt) / inv.filter_tc,
                     (s_term.imag() - is[k].q_filt) / inv.filter_tc};
  }
  return d;
}

void Simulator::apply_event(const SimEvent& ev) {
  switch (ev.kind) {
    case EventKind::BreakerOpen:
    case EventKind::BreakerClose: {
      auto it = state_.breaker_states.find(ev.target);
      if (it == state_.breaker_states.end())
        throw std::invalid_argument("event targets unknown breaker " + ev.target);
      it->second =
          ev.kind == EventKind::BreakerOpen ? BreakerState::Open : BreakerState::Closed;
      break;
    }
    case EventKind::FaultOn:
    case EventKind::FaultOff: {
      bool found = false;
      for (size_t j = 0; j < model_.faults.size(); ++j)
        if (model_.faults[j].id == ev.target) {
          state_.fault_on[j] = ev.kind == EventKind::FaultOn ? 1 : 0;
          found = true;
        }
      if (!found) throw std::invalid_argument("event targets unknown fault " + ev.target);
      break;
    }
  }
}

void Simulator::step(double dt, std::span<const SimEvent> due_events) {
  if (dt <= 0) throw std::invalid_argument("dt must be positive");

  bool event_step = false;
  for (const auto& ev : due_events) {
    auto before_breakers = state_.breaker_states;
    auto before_faults = state_.fault_on;
    apply_event(ev);
    if (state_.breaker_states != before_breakers || state_.fault_on != before_faults)
      event_step = true;
  }
  if (event_step) {
    rebuild_topology();
    absorb_angle_jumps();
  }

  // RK4 over machine {delta, omega, p_mech} and inverter {theta, p_filt, q_filt}
  const auto& m0 = state_.machines;
  const auto& i0 = state_.inverters;
  auto advance = [&](const Derivatives& d, double h) {
    std::pair<std::vector<MachineState>, std::vector<InverterState>> out{m0, i0};
    for (size_t k = 0; k < m0.size(); ++k) {
      out.first[k].delta += h * d.machine[k][0];
      out.first[k].omega += h * d.machine[k][1];
      out.first[k].p_mech += h * d.machine[k][2];
    }
    for (size_t k = 0; k < i0.size(); ++k) {
      out.second[k].theta += h * d.inverter[k][0];
      out.second[k].p_filt += h * d.inverter[k][1];
      out.second[k].q_filt += h * d.inverter[k][2];
    }
    return out;
  };

  Derivatives k1 = derivatives(m0, i0);
  auto s2 = advance(k1, dt / 2.0);
  Derivatives k2 = derivatives(s2.first, s2.second);
  auto s3 = advance(k2, dt / 2.0);
  Derivatives k3 = derivatives(s3.first, s3.second);
  auto s4 = advance(k3, dt);
  Derivatives k4 = derivatives(s4.first, s4.second);

  for (size_t k = 0; k < state_.machines.size(); ++k) {
    auto& ms = state_.machines[k];
    ms.delta += dt / 6.0 *
                (k1.machine[k][0] + 2 * k2.machine[k][0] + 2 * k3.machine[k][0] + k4.machine[k][0]);
    ms.omega += dt / 6.0 *
                (k1.machine[k][1] + 2 * k2.machine[k][1] + 2 * k3.machine[k][1] + k4.machine[k][1]);
    ms.p_mech += dt / 6.0 *
                 (k1.machine[k][2] + 2 * k2.machine[k][2] + 2 * k3.machine[k][2] + k4.machine[k][2]);
  }
  for (size_t k = 0; k < state_.inverters.size(); ++k) {
    auto& is = state_.inverters[k];
    is.theta += dt / 6.0 * (k1.inverter[k][0] + 2 * k2.inverter[k][0] + 2 * k3.inverter[k][0] +
                            k4.inverter[k][0]);
    is.p_filt += dt / 6.0 * (k1.inverter[k][1] + 2 * k2.inverter[k][1] + 2 * k3.inverter[k][1] +
                             k4.inverter[k][1]);
    is.q_filt += dt / 6.0 * (k1.inverter[k][2] + 2 * k2.inverter[k][2] + 2 * k3.inverter[k][2] +
                             k4.inverter[k][2]);
  }

  for (size_t k = 0; k < state_.machines.size(); ++k) {
    const auto& ms = state_.machines[k];
    if (!std::isfinite(ms.omega) || std::abs(ms.omega - 1.0) >= 0.1)
      throw SimulationDiverged("machine " + model_.machines[k].id + " speed " +
                               std::to_string(ms.omega) + " p.u. at t=" +
                               std::to_string(state_.t + dt));
  }

  state_.v = solve_network(state_.machines, state_.inverters);
  state_.t += dt;
  update_frequency_estimates(dt);
}

void Simulator::absorb_angle_jumps() {
  // post-event network solution at the step boundary: the instantaneous angle
  // jump enters the washout state directly, producing a spike of
  // jump/(2*pi*tau) that both dt and dt/2 grids see at the same instant
  Eigen::VectorXcd v_plus = solve_network(state_.machines, state_.inverters);
  for (int i = 0; i < model_.n_buses(); ++i) {
    int isl = islands_.island_of.at(model_.buses[i].id);
    if (!islands_.energized[isl]) {
      prev_valid_[i] = 0;
      continue;
    }
    double ang = std::arg(v_plus[i]);
    if (prev_valid_[i]) washout_[i] += wrap_angle(ang - prev_ang_[i]);
    prev_ang_[i] = ang;
  }
  state_.v = v_plus;
}

void Simulator::update_frequency_estimates(double dt) {
  const double decay = std::exp(-dt / kFreqFilterTc);
  // exact update for angle varying linearly across the step:
  // washout <- decay * washout + d_angle * (tau/dt) * (1 - decay)
  const double ramp_gain = (kFreqFilterTc / dt) * (1.0 - decay);
  for (int i = 0; i < model_.n_buses(); ++i) {
    int isl = islands_.island_of.at(model_.buses[i].id);
    if (!islands_.energized[isl]) {
      state_.f_est_hz[i] = std::numeric_limits<double>::quiet_NaN();
      prev_valid_[i] = 0;
      continue;
    }
    double ang = std::arg(state_.v[i]);
    if (!prev_valid_[i]) {
      // bus just (re-)energized: restart the estimator at nominal
      washout_[i] = 0.0;
      state_.f_est_hz[i] = model_.f_nominal_hz;
    } else {
      double d_ang = wrap_angle(ang - prev_ang_[i]);
      washout_[i] = decay * washout_[i] + ramp_gain * d_ang;
      state_.f_est_hz[i] = model_.f_nominal_hz + washout_[i] / (kTwoPi * kFreqFilterTc);
    }
    prev_ang_[i] = ang;
    prev_valid_[i] = 1;
  }
}

Complex Simulator::machine_output_mva(size_t i) const {
  const auto& g = model_.machines.at(i);
  const auto& ms = state_.machines.at(i);
  double ratio = g.rating_mva / model_.s_base_mva;
  Complex e = std::polar(ms.emf, ms.delta);
  Complex vb = state_.v[model_.index_of_bus(g.bus)];
  Complex i_out = (e - vb) / Complex(0.0, g.xdp / ratio);
  return vb * std::conj(i_out) * model_.s_base_mva;
}

Complex Simulator::inverter_output_mva(size_t i) const {
  const auto& inv = model_.inverters.at(i);
  const auto& is = state_.inverters.at(i);
  double ratio = inv.rating_mva / model_.s_base_mva;
  double e_mag = is.v_ref - inv.mq * (is.q_filt - is.q_ref);
  Complex e = std::polar(e_mag, is.theta);
  Complex vb = state_.v[model_.index_of_bus(inv.bus)];
  Complex i_out = (e - vb) / Complex(0.0, inv.x_out / ratio);
  return vb * std::conj(i_out) * model_.s_base_mva;
}

Complex Simulator::bus_injection_mva(int bus_id) const {
  Complex s;
  for (size_t k = 0; k < model_.machines.size(); ++k)
    if (model_.machines[k].bus == bus_id) s += machine_output_mva(k);
  for (size_t k = 0; k < model_.inverters.size(); ++k)
    if (model_.inverters[k].bus == bus_id) s += inverter_output_mva(k);
  int bi = model_.index_of_bus(bus_id);
  Complex vb = state_.v[bi];
  s -= vb * std::conj(state_.load_y[bi] * vb) * model_.s_base_mva;
  return s;
}

double Simulator::island_power_imbalance(int island_index) const {
  if (!islands_.energized[island_index]) return 0.0;
  double p_src = 0.0, p_load = 0.0;
  for (size_t k = 0; k < model_.machines.size(); ++k)
    if (islands_.island_of.at(model_.machines[k].bus) == island_index)
      p_src += machine_output_mva(k).real() / model_.s_base_mva;
  for (size_t k = 0; k < model_.inverters.size(); ++k)
    if (islands_.island_of.at(model_.inverters[k].bus) == island_index)
      p_src += inverter_output_mva(k).real() / model_.s_base_mva;

  // network + fault dissipation computed from the bus-admittance view
  Eigen::MatrixXcd ynet = Eigen::MatrixXcd(
      model::build_admittance(model_, state_.breaker_states, effective_faults()));
  double p_net = 0.0;
  for (int bus_id : islands_.islands[island_index]) {
    int i = model_.index_of_bus(bus_id);
    Complex vb = state_.v[i];
    p_load += (vb * std::conj(state_.load_y[i] * vb)).real();
    Complex yv;
    for (int bus2 : islands_.islands[island_index])
      yv += ynet(i, model_.index_of_bus(bus2)) * state_.v[model_.index_of_bus(bus2)];
    p_net += (vb * std::conj(yv)).real();
  }
  return p_src - p_load - p_net;
}

bool Simulator::pcc_closed(const std::string& breaker_id) const {
  return state_.breaker_states.at(breaker_id) == BreakerState::Closed;
}

} // namespace gridstorm::dynamics
