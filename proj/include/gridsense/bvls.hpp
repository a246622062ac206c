#pragma once

#include <Eigen/Core>

namespace gridsense {

struct BvlsResult {
  Eigen::VectorXd x;
  double kkt_residual = 0.0;
  int iterations = 0;
};

/// Bounded-variable least squares: minimize ||A x - b||_2 subject to
/// lower <= x <= upper, by an active-set method. Requires lower <= 0 <=
/// upper componentwise is NOT assumed; any consistent box works. Throws
/// ArgumentError on inconsistent bounds.
BvlsResult bvls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                double kkt_tol = 1e-9, int max_iterations = 0);

}  // namespace gridsense
