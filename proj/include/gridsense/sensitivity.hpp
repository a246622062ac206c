#pragma once

#include <Eigen/SparseCore>
#include <cstdint>
#include <memory>
#include <mutex>
#include <vector>

#include "gridsense/loadflow.hpp"

namespace gridsense {

/// The fixed linear system shared by every sensitivity right-hand side:
/// the real 2N x 2N expansion of
///   dconj(E_i) * (Y E)_i + conj(E_i) * sum_{j in pq} Y_ij dE_j
/// with unknowns (Re dE_j, Im dE_j) interleaved per pq index. Assembled and
/// factorized once per operating point; every column reuses the
/// factorization.
class SensitivitySystem {
 public:
  SensitivitySystem(const OperatingPoint& op, const CompoundAdmittance& y,
                    const IndexMap& index);

  /// Column d E / d P_l (injected active power at pq bus-phase l).
  /// Size M, exactly zero at slack indices.
  Eigen::VectorXcd solve_dp(BusPhase l) const;
  /// Column d E / d Q_l (injected reactive power).
  Eigen::VectorXcd solve_dq(BusPhase l) const;
  /// Column W_k = d E / d |E_k| for a slack bus-phase k.
  Eigen::VectorXcd solve_tap(BusPhase k) const;

  /// Residual ||A x - rhs||_inf of the last constructed column for the
  /// given right-hand side; used by the property suite.
  double solve_residual(const Eigen::VectorXd& rhs,
                        const Eigen::VectorXd& x) const;

  /// Sparse view of A, assembled on first use (diagnostics and residual
  /// checks; the factorization itself works on the block structure).
  const Eigen::SparseMatrix<double>& matrix() const;
  const Eigen::VectorXcd& voltage() const { return voltage_; }
  const IndexMap& index() const { return index_; }
  int n_pq() const { return n_; }

  std::uint64_t factorization_count() const { return factorizations_; }

  /// Real right-hand sides in the internal interleaved layout.
  Eigen::VectorXd rhs_dp(BusPhase l) const;
  Eigen::VectorXd rhs_dq(BusPhase l) const;
  Eigen::VectorXd rhs_tap(BusPhase k) const;
  /// Back-substitution against the cached factorization.
  Eigen::VectorXd solve_raw(const Eigen::VectorXd& rhs) const;
  /// Batched back-substitution, one right-hand side per column.
  Eigen::MatrixXd solve_raw_batch(const Eigen::MatrixXd& rhs) const;
  /// Expands a real solution vector to the full complex column over M.
  Eigen::VectorXcd expand(const Eigen::VectorXd& x) const;

  /// True when the radial block elimination is in use (general sparse LU
  /// otherwise, e.g. on meshed networks).
  bool using_tree_solver() const;

 private:
  IndexMap index_;
  int n_ = 0;
  std::vector<Eigen::Triplet<double>> triplets_;
  mutable Eigen::SparseMatrix<double> matrix_;
  mutable std::once_flag matrix_once_;
  Eigen::VectorXcd voltage_;
  std::vector<Eigen::VectorXd> tap_rhs_;  // per slack position
  struct Factorization;
  std::shared_ptr<const Factorization> lu_;
  std::uint64_t factorizations_ = 0;
};

/// Magnitude chain rule: d|E_i| = Re(conj(E_i) dE_i) / |E_i|.
/// Throws NumericalError on a zero-magnitude voltage.
Eigen::VectorXd magnitude_of(const Eigen::VectorXcd& column,
                             const Eigen::VectorXcd& voltage);

struct VoltageSensitivities {
  Eigen::MatrixXcd dE_dP;  // M x N, columns in pq order
  Eigen::MatrixXcd dE_dQ;
  Eigen::MatrixXd dmag_dP;  // M x N
  Eigen::MatrixXd dmag_dQ;
};

struct TapSensitivities {
  Eigen::MatrixXcd W;          // M x S, columns in slack order
  Eigen::MatrixXd dmag_dslack;  // d|E_i| / d|E_k|
  Eigen::MatrixXd dmag_dtap;    // scaled by rated * step; 0 where no tap
  std::vector<bool> has_tap;    // per slack column
};

struct CurrentSensitivities {
  // Entry [b] has one row per carried phase slot of branch b.
  std::vector<Eigen::MatrixXcd> dI_dP;  // p x N
  std::vector<Eigen::MatrixXcd> dI_dQ;
  std::vector<Eigen::MatrixXd> dmag_dP;
  std::vector<Eigen::MatrixXd> dmag_dQ;
  std::vector<Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>> valid;
  double epsilon = 1e-9;
};

struct SensitivitySet {
  VoltageSensitivities voltage;
  TapSensitivities tap;
  CurrentSensitivities current;
  std::uint64_t factorizations = 0;
};

/// Branch-current coefficients as linear images of the voltage columns:
/// dI = Y_L (dE_from - dE_to); magnitudes via Re(conj(I) dI)/|I|, flagged
/// invalid below `epsilon_current`.
CurrentSensitivities current_sens(const VoltageSensitivities& volt,
                                  const CompoundAdmittance& y,
                                  const OperatingPoint& op,
                                  bool include_sending_shunt = false,
                                  double epsilon_current = 1e-9);

/// One assembly + factorization, then 2N + S back-solves (P and Q per pq
/// bus-phase, one tap column per slack bus-phase). `threads` > 1 fans the
/// back-solves out over a shared factorization; output is identical.
SensitivitySet full_sensitivity(const OperatingPoint& op,
                                const CompoundAdmittance& y,
                                const NetworkModel& net, const IndexMap& index,
                                int threads = 1);

}  // namespace gridsense
