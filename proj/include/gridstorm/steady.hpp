#pragma once

#include <Eigen/Dense>

#include "gridstorm/model.hpp"

namespace gridstorm::steady {

class PowerFlowError : public std::runtime_error {
public:
  explicit PowerFlowError(const std::string& msg) : std::runtime_error("power flow: " + msg) {}
};

struct PowerFlowSolution {
  Eigen::VectorXd v_mag;  // p.u., model bus order
  Eigen::VectorXd v_ang;  // rad, slack at 0
  Eigen::VectorXd p_inj;  // MW, net injection per bus
  Eigen::VectorXd q_inj;  // Mvar
  int iterations = 0;
  double max_mismatch = 0.0; // p.u., at exit

  model::Complex voltage(int bus_index) const {
    return std::polar(v_mag[bus_index], v_ang[bus_index]);
  }
};

/// Full Newton-Raphson with analytic polar Jacobian, flat start.
/// PV buses hold |V| at their setpoint; no reactive limits.
PowerFlowSolution solve_power_flow(const model::GridModel& model, double tol = 1e-8,
                                   int max_iter = 20);

/// Mismatch vector [dP(non-slack); dQ(PQ)] in p.u. at voltage state (v_mag, v_ang).
/// Exposed for finite-difference checks of the Jacobian.
Eigen::VectorXd power_mismatch(const model::GridModel& model, const model::SparseMatrixC& ybus,
                               const Eigen::VectorXd& v_mag, const Eigen::VectorXd& v_ang);

Eigen::MatrixXd power_flow_jacobian(const model::GridModel& model,
                                    const model::SparseMatrixC& ybus,
                                    const Eigen::VectorXd& v_mag, const Eigen::VectorXd& v_ang);

} // namespace gridstorm::steady
