#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridsense/sensitivity.hpp"

namespace gridsense {

/// Controllable resource at a pq bus. Powers are generation-positive and
/// refer to the 3-phase totals; rectangular PQ capability box.
struct DerSpec {
  int bus = 0;
  double p_init_kw = 0.0;
  double p_max_kw = 0.0;
  double q_min_kvar = 0.0;
  double q_max_kvar = 0.0;
  double q_init_kvar = 0.0;
};

enum class ControlMode { balanced_3phase, per_phase };

struct ControlVariable {
  enum class Kind { der_p, der_q, tap };
  Kind kind = Kind::der_p;
  int der = -1;           // index into ders, -1 for tap
  Phase phase = Phase::a;  // meaningful in per_phase mode
  bool aggregated = false;  // true in balanced mode (value is the 3-phase total)
  double initial_kw = 0.0;  // initial setpoint this variable moves (kW/kvar)
};

/// Linearized voltage model around one operating point:
///   delta |E| = gain * delta_x
/// with delta_x holding DER power changes (per-unit, injection-positive)
/// and one common tap-position change in steps.
struct ControlProblem {
  ControlMode mode = ControlMode::balanced_3phase;
  double target_pu = 1.0;
  std::vector<DerSpec> ders;
  std::vector<ControlVariable> vars;
  Eigen::MatrixXd gain;   // M x nvars
  Eigen::VectorXd lower;  // bounds on delta_x
  Eigen::VectorXd upper;
  Eigen::VectorXd initial_mag;  // |E| at the linearization point, size M
  int tap_var = -1;
  int tap_position = 0;  // current (uniform) position
  double power_base_va = 1.0;
};

/// Stacks sensitivity columns into the control model. Balanced mode gives
/// each DER one P and one Q variable spread equally over its phases;
/// per-phase mode one pair per existing phase. A single tap variable moves
/// every phase of the tapped slack bus together.
ControlProblem build_linear_model(const SensitivitySet& sens,
                                  const NetworkModel& net,
                                  const IndexMap& index,
                                  const OperatingPoint& op,
                                  const std::vector<DerSpec>& ders,
                                  ControlMode mode, double target_pu = 1.0);

struct DerSetpoint {
  int bus = 0;
  Phase phase = Phase::a;
  bool aggregated = false;
  double p_kw = 0.0;
  double q_kvar = 0.0;
};

struct ControlSolution {
  Eigen::VectorXd delta;  // solved step, same layout as problem.vars
  double objective_initial = 0.0;
  double objective_prerounding = 0.0;  // predicted, continuous tap
  double objective_predicted = 0.0;    // predicted, rounded tap
  double tap_continuous = 0.0;
  int tap_rounded = 0;
  Eigen::VectorXd predicted_mag;  // after tap rounding
  std::vector<DerSetpoint> setpoints;
};

/// Bounded least squares toward the voltage target; taps are solved as
/// pseudo-continuous and rounded to the nearest integer (ties toward zero)
/// afterwards, then the prediction is re-evaluated.
ControlSolution solve_control(const ControlProblem& problem);

struct TrueProfile {
  OperatingPoint op;
  Eigen::VectorXd actual_mag;
  double objective_actual = 0.0;
  double prediction_error_inf = 0.0;
  bool converged = false;
};

/// Applies the solved set points and tap position to the network, re-runs
/// the load flow, and reports the realized profile next to the prediction.
TrueProfile evaluate_true_profile(const NetworkModel& net,
                                  const CompoundAdmittance& y,
                                  const IndexMap& index,
                                  const OperatingPoint& base,
                                  const ControlProblem& problem,
                                  const ControlSolution& solution);

/// Realized profile for an arbitrary step vector (no rounding); used to
/// verify the first-order model, e.g. under step scaling.
TrueProfile evaluate_step(const NetworkModel& net, const CompoundAdmittance& y,
                          const IndexMap& index, const OperatingPoint& base,
                          const ControlProblem& problem,
                          const Eigen::VectorXd& delta,
                          bool round_tap = false);

}  // namespace gridsense
