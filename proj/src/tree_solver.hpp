#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <vector>

namespace gridsense {

/// Block LU on the bus-block tree of a radial network's sensitivity system.
/// Eliminating leaf buses first produces no fill at all, so factorization
/// and solves run in time linear in the number of buses. Only applicable
/// when the pq bus graph is a forest; callers fall back to a general
/// sparse LU otherwise.
class RadialBlockSolver {
 public:
  /// Builds from raw triplets (duplicates accumulate). node_of[r] is the
  /// pq bus node owning equation row r, with contiguous rows per node;
  /// adjacency lists bus-level edges between nodes.
  RadialBlockSolver(const std::vector<Eigen::Triplet<double>>& triplets,
                    int size, const std::vector<int>& node_of, int node_count,
                    const std::vector<std::pair<int, int>>& adjacency);

  /// False when the node graph has a cycle or an entry falls outside the
  /// tree pattern; nothing is factorized then.
  bool applicable() const { return applicable_; }
  /// False when a pivot block is singular.
  bool factorized() const { return factorized_; }

  /// Batched solve; columns are independent right-hand sides.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

 private:
  struct Node {
    int first_row = 0;
    int rows = 0;
    int parent = -1;                 // -1 at a subtree root
    std::vector<int> children;
    Eigen::MatrixXd dinv;            // inverse of the reduced diagonal block
    Eigen::MatrixXd to_parent;       // A[node rows, parent cols]
    Eigen::MatrixXd from_parent;     // A[parent rows, node cols]
  };

  std::vector<Node> nodes_;
  std::vector<int> post_order_;
  bool applicable_ = false;
  bool factorized_ = false;
};

}  // namespace gridsense
