#pragma once

#include <string>
#include <vector>

#include "gridsense/loadflow.hpp"

namespace gridsense {

enum class PerturbTarget { active_power, reactive_power, slack_magnitude };
enum class FdScheme { forward, central };

/// One finite-difference probe: a single control variable is displaced
/// while every other injection stays fixed. Powers are perturbed in the
/// injection direction (matching the sensitivity sign convention).
struct PerturbationSpec {
  PerturbTarget target = PerturbTarget::active_power;
  BusPhase at;
  double delta = 1e-5;
  FdScheme scheme = FdScheme::central;
};

struct OracleColumn {
  Eigen::VectorXd dmag;                        // size M
  std::vector<Eigen::VectorXd> dcurrent_mag;   // per branch, per phase slot
};

/// Numeric baseline: repeated load flows under small perturbations.
/// Throws NumericalError when a perturbed load flow fails to converge.
OracleColumn fd_oracle(const NetworkModel& net, const CompoundAdmittance& y,
                       const IndexMap& index, const OperatingPoint& base,
                       const PerturbationSpec& spec);

/// Polar-coordinate load-flow Jacobian tables, obtained by full inversion.
/// Rows are zero at slack indices; tap sensitivities are not available
/// from this method.
struct JacobianTables {
  Eigen::MatrixXd dmag_dP;  // M x N
  Eigen::MatrixXd dmag_dQ;
  Eigen::MatrixXd dtheta_dP;
  Eigen::MatrixXd dtheta_dQ;
};

JacobianTables jacobian_sensitivities(const CompoundAdmittance& y,
                                      const IndexMap& index,
                                      const OperatingPoint& op);

struct BenchmarkReport {
  std::string feeder_id;
  int n_pq = 0;
  int m = 0;
  int repetitions = 0;
  double jacobian_mean_ms = 0.0;
  double jacobian_ci_ms = 0.0;  // 95% half-width, normal approximation
  double analytical_mean_ms = 0.0;
  double analytical_ci_ms = 0.0;
  double ratio = 0.0;  // jacobian mean / analytical mean
};

/// Times the Jacobian route (build + dense inversion + extraction) against
/// the analytical route (build + sparse factorization + 2N column solves)
/// on identical pre-loaded state, single-threaded, after verifying that
/// the two methods agree. File I/O is excluded by construction.
BenchmarkReport benchmark(const CompoundAdmittance& y, const IndexMap& index,
                          const OperatingPoint& op, int repetitions,
                          const std::string& feeder_id = "");

}  // namespace gridsense
