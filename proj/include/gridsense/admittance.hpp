#pragma once

#include <Eigen/SparseCore>
#include <map>
#include <utility>
#include <vector>

#include "gridsense/network.hpp"

namespace gridsense {

/// Sparse complex nodal admittance matrix over the existing bus-phase
/// indices, plus the per-branch blocks it was assembled from.
struct CompoundAdmittance {
  int dimension = 0;
  Eigen::SparseMatrix<Complex> matrix;

  struct BranchBlocks {
    std::vector<int> from_index;  // global index per phase slot
    std::vector<int> to_index;
    Eigen::MatrixXcd series;      // Y_L = Z^-1, positive sign convention
    Eigen::MatrixXcd shunt_half;  // Ysh / 2
  };
  std::vector<BranchBlocks> branch;  // parallel to net.branches

  /// First branch between the two buses, orientation-insensitive.
  int branch_index(int bus_i, int bus_j) const;  // -1 if none

  std::map<std::pair<int, int>, int> pair_lookup;  // (min,max) bus ids
};

/// Assembles the compound matrix: Y_L on both diagonal blocks, -Y_L on the
/// off-diagonal blocks, Ysh/2 on each end's diagonal block. Throws
/// NumericalError naming the branch when a series block is singular.
CompoundAdmittance build_compound_admittance(const NetworkModel& net,
                                             const IndexMap& index);

/// Series-admittance block between two adjacent buses (equal to minus the
/// off-diagonal compound block). Direction-independent; throws
/// ArgumentError when the pair has no branch.
Eigen::MatrixXcd branch_block(const CompoundAdmittance& y, int from_bus,
                              int to_bus);

/// All stored entries sorted by (row, col); used by the dump interface.
struct AdmittanceEntry {
  int row = 0;
  int col = 0;
  Complex value;
};
std::vector<AdmittanceEntry> sorted_entries(const CompoundAdmittance& y);

/// Row sums of the compound matrix; zero (to rounding) when shunts vanish.
Eigen::VectorXcd row_sums(const CompoundAdmittance& y);

}  // namespace gridsense
