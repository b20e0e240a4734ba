#include "gridstorm/steady.hpp"

#include <cmath>

namespace gridstorm::steady {

using model::BusKind;
using model::Complex;
using model::GridModel;
using model::SparseMatrixC;

namespace {

// Specified injections in p.u.: generation dispatch minus load. Slack P and
// PV-bus Q are free and excluded from the mismatch.
void specified_injections(const GridModel& m, Eigen::VectorXd& p_spec, Eigen::VectorXd& q_spec) {
  const int n = m.n_buses();
  p_spec = Eigen::VectorXd::Zero(n);
  q_spec = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    p_spec[i] -= m.buses[i].load_p_mw / m.s_base_mva;
    q_spec[i] -= m.buses[i].load_q_mvar / m.s_base_mva;
  }
  for (const auto& g : m.machines)
    p_spec[m.index_of_bus(g.bus)] += g.p_dispatch_mw / m.s_base_mva;
  for (const auto& inv : m.inverters)
    p_spec[m.index_of_bus(inv.bus)] += inv.p_set_mw / m.s_base_mva;
}

// Calculated P/Q injections at the given voltage state.
void calculated_injections(const SparseMatrixC& ybus, const Eigen::VectorXd& v_mag,
                           const Eigen::VectorXd& v_ang, Eigen::VectorXd& p,
                           Eigen::VectorXd& q) {
  const int n = static_cast<int>(v_mag.size());
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i) v[i] = std::polar(v_mag[i], v_ang[i]);
  Eigen::VectorXcd s = v.array() * (ybus * v).conjugate().array();
  p = s.real();
  q = s.imag();
}

struct Indexing {
  std::vector<int> ang_buses; // buses with free angle (non-slack)
  std::vector<int> mag_buses; // buses with free magnitude (PQ)
};

Indexing make_indexing(const GridModel& m) {
  Indexing ix;
  for (int i = 0; i < m.n_buses(); ++i) {
    if (m.buses[i].kind != BusKind::Slack) ix.ang_buses.push_back(i);
    if (m.buses[i].kind == BusKind::PQ) ix.mag_buses.push_back(i);
  }
  return ix;
}

} // namespace

Eigen::VectorXd power_mismatch(const GridModel& m, const SparseMatrixC& ybus,
                               const Eigen::VectorXd& v_mag, const Eigen::VectorXd& v_ang) {
  Eigen::VectorXd p_spec, q_spec, p, q;
  specified_injections(m, p_spec, q_spec);
  calculated_injections(ybus, v_mag, v_ang, p, q);
  auto ix = make_indexing(m);
  Eigen::VectorXd mis(ix.ang_buses.size() + ix.mag_buses.size());
  int k = 0;
  for (int i : ix.ang_buses) mis[k++] = p_spec[i] - p[i];
  for (int i : ix.mag_buses) mis[k++] = q_spec[i] - q[i];
  return mis;
}

Eigen::MatrixXd power_flow_jacobian(const GridModel& m, const SparseMatrixC& ybus,
                                    const Eigen::VectorXd& v_mag, const Eigen::VectorXd& v_ang) {
  auto ix = make_indexing(m);
  const int na = static_cast<int>(ix.ang_buses.size());
  const int nm = static_cast<int>(ix.mag_buses.size());

  Eigen::MatrixXcd yd = Eigen::MatrixXcd(ybus);
  Eigen::VectorXd p, q;
  calculated_injections(ybus, v_mag, v_ang, p, q);

  // Jacobian of the mismatch (spec minus calc), hence the negated partials.
  Eigen::MatrixXd jac(na + nm, na + nm);
  auto G = [&](int i, int j) { return yd(i, j).real(); };
  auto B = [&](int i, int j) { return yd(i, j).imag(); };

  for (int r = 0; r < na + nm; ++r) {
    bool p_row = r < na;
    int i = p_row ? ix.ang_buses[r] : ix.mag_buses[r - na];
    for (int c = 0; c < na + nm; ++c) {
      bool ang_col = c < na;
      int j = ang_col ? ix.ang_buses[c] : ix.mag_buses[c - na];
      double tij = v_ang[i] - v_ang[j];
      double d;
      if (p_row && ang_col) {
        d = i == j ? -q[i] - B(i, i) * v_mag[i] * v_mag[i]
                   : v_mag[i] * v_mag[j] * (G(i, j) * std::sin(tij) - B(i, j) * std::cos(tij));
      } else if (p_row) {
        d = i == j ? p[i] / v_mag[i] + G(i, i) * v_mag[i]
                   : v_mag[i] * (G(i, j) * std::cos(tij) + B(i, j) * std::sin(tij));
      } else if (ang_col) {
        d = i == j ? p[i] - G(i, i) * v_mag[i] * v_mag[i]
                   : -v_mag[i] * v_mag[j] * (G(i, j) * std::cos(tij) + B(i, j) * std::sin(tij));
      } else {
        d = i == j ? q[i] / v_mag[i] - B(i, i) * v_mag[i]
                   : v_mag[i] * (G(i, j) * std::sin(tij) - B(i, j) * std::cos(tij));
      }
      jac(r, c) = -d;
    }
  }
  return jac;
}

PowerFlowSolution solve_power_flow(const GridModel& m, double tol, int max_iter) {
  auto states = model::initial_breaker_states(m);
  auto part = model::find_islands(m, states);
  if (part.islands.size() != 1)
    throw PowerFlowError("network not connected under initial breaker states (" +
                         std::to_string(part.islands.size()) + " islands)");

  const int n = m.n_buses();
  SparseMatrixC ybus = model::build_admittance(m, states, {});

  Eigen::VectorXd v_mag(n), v_ang = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i)
    v_mag[i] = m.buses[i].kind == BusKind::PQ ? 1.0 : m.buses[i].v_set;

  auto ix = make_indexing(m);
  const int na = static_cast<int>(ix.ang_buses.size());

  PowerFlowSolution sol;
  for (sol.iterations = 1; sol.iterations <= max_iter; ++sol.iterations) {
    Eigen::VectorXd mis = power_mismatch(m, ybus, v_mag, v_ang);
    sol.max_mismatch = mis.size() ? mis.cwiseAbs().maxCoeff() : 0.0;
    if (!std::isfinite(sol.max_mismatch))
      throw PowerFlowError("mismatch diverged (voltage collapse)");
    if (sol.max_mismatch < tol) {
      sol.v_mag = v_mag;
      sol.v_ang = v_ang;
      Eigen::VectorXd p, q;
      calculated_injections(ybus, v_mag, v_ang, p, q);
      sol.p_inj = p * m.s_base_mva;
      sol.q_inj = q * m.s_base_mva;
      return sol;
    }
    Eigen::MatrixXd jac = power_flow_jacobian(m, ybus, v_mag, v_ang);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible())
      throw PowerFlowError("singular Jacobian (voltage collapse) at iteration " +
                           std::to_string(sol.iterations));
    Eigen::VectorXd dx = lu.solve(-mis); // J dx = -mismatch, J already negated
    for (int k = 0; k < na; ++k) v_ang[ix.ang_buses[k]] += dx[k];
    for (size_t k = 0; k < ix.mag_buses.size(); ++k) v_mag[ix.mag_buses[k]] += dx[na + k];
    if (v_mag.minCoeff() <= 0.0)
      throw PowerFlowError("voltage magnitude collapsed below zero");
  }
  throw PowerFlowError("no convergence after " + std::to_string(max_iter) +
                       " iterations, max mismatch " + std::to_string(sol.max_mismatch) + " p.u.");
}

} // namespace gridstorm::steady
