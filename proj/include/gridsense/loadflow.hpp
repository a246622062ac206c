#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "gridsense/admittance.hpp"
#include "gridsense/network.hpp"

namespace gridsense {

/// Converged (or not) network state: one phasor per bus-phase index.
/// Sign conventions: `injection` stores the declared constant-PQ powers,
/// absorption positive; the nodal equation is written for injected power,
/// so the residual uses -injection on its left-hand side.
struct OperatingPoint {
  Eigen::VectorXcd voltage;    // size M
  Eigen::VectorXcd injection;  // size M; absorbed S at pq entries, 0 at slack
  bool converged = false;
  double max_mismatch = std::numeric_limits<double>::infinity();
  int iterations = 0;
  std::vector<double> mismatch_trace;
};

struct LoadflowOptions {
  double tolerance = 1e-10;  // per-unit power mismatch, infinity norm
  int max_iterations = 50;
  /// Replaces the network's declared injections (size M, pq entries used).
  std::optional<Eigen::VectorXcd> injection_override;
  /// Replaces the tap-adjusted slack phasors (size M, slack entries used).
  std::optional<Eigen::VectorXcd> slack_override;
  /// Warm start; defaults to a flat start at the slack phasors rotated to
  /// the nominal phase angles.
  std::optional<Eigen::VectorXcd> initial_voltages;
};

/// Newton-Raphson in rectangular coordinates on the pq unknowns.
/// Non-convergence is reported in the result, not thrown; a singular
/// Newton step throws NumericalError.
OperatingPoint solve_loadflow(const NetworkModel& net,
                              const CompoundAdmittance& y,
                              const IndexMap& index,
                              const LoadflowOptions& options = {});

/// Wraps externally supplied phasors (e.g. from state estimation) as an
/// operating point; mismatch is evaluated, never iterated on.
OperatingPoint operating_point_from_voltages(const NetworkModel& net,
                                             const CompoundAdmittance& y,
                                             const IndexMap& index,
                                             const Eigen::VectorXcd& voltages);

/// Complex power injected into the network at one index: E_i * conj((Y E)_i).
/// Positive real part means generation; a converged pq bus yields minus its
/// declared absorption.
Complex injected_power(const OperatingPoint& op, const CompoundAdmittance& y,
                       int index);

/// Power-balance mismatch per pq index (complex), the quantity driven to
/// zero by the solver and re-assertable independently of it.
Eigen::VectorXcd power_mismatch(const OperatingPoint& op,
                                const CompoundAdmittance& y,
                                const IndexMap& index);

/// Per-branch currents in from->to orientation, aligned with each branch's
/// phase slots. I = Y_L (E_from - E_to); with `include_sending_shunt` the
/// sending-end half-shunt current is added (full pi-model current).
std::vector<Eigen::VectorXcd> branch_currents(const OperatingPoint& op,
                                              const CompoundAdmittance& y,
                                              bool include_sending_shunt = false);

/// Total series + shunt losses over all branches (complex).
Complex total_losses(const OperatingPoint& op, const CompoundAdmittance& y);

/// Sum of injected_power over every index; equals total_losses at a
/// solved operating point.
Complex total_injected(const OperatingPoint& op, const CompoundAdmittance& y);

}  // namespace gridsense
