#include "tree_solver.hpp"

#include <set>

#include "gridsense/types.hpp"

namespace gridsense {

RadialBlockSolver::RadialBlockSolver(
    const std::vector<Eigen::Triplet<double>>& triplets, int size,
    const std::vector<int>& node_of, int node_count,
    const std::vector<std::pair<int, int>>& adjacency) {
  nodes_.resize(static_cast<size_t>(node_count));
  for (int r = 0; r < size; ++r) {
    Node& node = nodes_[static_cast<size_t>(node_of[static_cast<size_t>(r)])];
    if (node.rows == 0) node.first_row = r;
    ++node.rows;
  }

  // parent assignment by DFS over the bus forest; a back edge means a mesh
  std::vector<std::vector<int>> neighbors(static_cast<size_t>(node_count));
  std::set<std::pair<int, int>> seen_edges;
  for (auto [a, b] : adjacency) {
    if (a == b) return;  // self-edge: not a forest
    auto key = std::minmax(a, b);
    if (!seen_edges.insert({key.first, key.second}).second)
      return;  // parallel edge: cycle
    neighbors[static_cast<size_t>(a)].push_back(b);
    neighbors[static_cast<size_t>(b)].push_back(a);
  }

  std::vector<int> state(static_cast<size_t>(node_count), 0);
  post_order_.reserve(static_cast<size_t>(node_count));
  for (int root = 0; root < node_count; ++root) {
    if (state[static_cast<size_t>(root)] != 0) continue;
    // iterative DFS emitting children before parents
    std::vector<std::pair<int, size_t>> stack{{root, 0}};
    state[static_cast<size_t>(root)] = 1;
    nodes_[static_cast<size_t>(root)].parent = -1;
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      const auto& adj = neighbors[static_cast<size_t>(u)];
      if (next < adj.size()) {
        int v = adj[next++];
        if (v == nodes_[static_cast<size_t>(u)].parent) continue;
        if (state[static_cast<size_t>(v)] != 0) return;  // cycle
        state[static_cast<size_t>(v)] = 1;
        nodes_[static_cast<size_t>(v)].parent = u;
        nodes_[static_cast<size_t>(u)].children.push_back(v);
        stack.push_back({v, 0});
      } else {
        post_order_.push_back(u);
        stack.pop_back();
      }
    }
  }
  applicable_ = true;

  // accumulate the dense blocks straight from the triplets
  std::vector<Eigen::MatrixXd> diag(static_cast<size_t>(node_count));
  for (int i = 0; i < node_count; ++i) {
    Node& node = nodes_[static_cast<size_t>(i)];
    diag[static_cast<size_t>(i)] = Eigen::MatrixXd::Zero(node.rows, node.rows);
    if (node.parent >= 0) {
      const Node& par = nodes_[static_cast<size_t>(node.parent)];
      node.to_parent = Eigen::MatrixXd::Zero(node.rows, par.rows);
      node.from_parent = Eigen::MatrixXd::Zero(par.rows, node.rows);
    }
  }
  for (const auto& t : triplets) {
    int rn = node_of[static_cast<size_t>(t.row())];
    int cn = node_of[static_cast<size_t>(t.col())];
    Node& rnode = nodes_[static_cast<size_t>(rn)];
    Node& cnode = nodes_[static_cast<size_t>(cn)];
    int rr = t.row() - rnode.first_row;
    int cc = t.col() - cnode.first_row;
    if (rn == cn) {
      diag[static_cast<size_t>(rn)](rr, cc) += t.value();
    } else if (cnode.parent == rn) {
      cnode.from_parent(rr, cc) += t.value();
    } else if (rnode.parent == cn) {
      rnode.to_parent(rr, cc) += t.value();
    } else {
      applicable_ = false;  // entry outside the tree pattern
      return;
    }
  }

  // leaf-first elimination: children fold into their parent's diagonal
  for (int u : post_order_) {
    Node& node = nodes_[static_cast<size_t>(u)];
    Eigen::MatrixXd reduced = diag[static_cast<size_t>(u)];
    for (int c : node.children) {
      const Node& child = nodes_[static_cast<size_t>(c)];
      reduced.noalias() -=
          child.from_parent * (child.dinv * child.to_parent);
    }
    node.dinv = reduced.inverse();
    if (!node.dinv.allFinite()) return;  // factorized_ stays false
    double residual =
        (reduced * node.dinv -
         Eigen::MatrixXd::Identity(node.rows, node.rows))
            .cwiseAbs()
            .maxCoeff();
    if (!(residual < 1e-8)) return;  // near-singular pivot block
  }
  factorized_ = true;
}

Eigen::MatrixXd RadialBlockSolver::solve(const Eigen::MatrixXd& rhs) const {
  if (!factorized_)
    throw NumericalError("radial block solver is not factorized");
  Eigen::MatrixXd reduced = rhs;
  Eigen::MatrixXd propagated(rhs.rows(), rhs.cols());

  for (int u : post_order_) {
    const Node& node = nodes_[static_cast<size_t>(u)];
    auto panel = reduced.middleRows(node.first_row, node.rows);
    for (int c : node.children) {
      const Node& child = nodes_[static_cast<size_t>(c)];
      panel.noalias() -=
          child.from_parent *
          propagated.middleRows(child.first_row, child.rows);
    }
    propagated.middleRows(node.first_row, node.rows).noalias() =
        node.dinv * panel;
  }

  Eigen::MatrixXd x(rhs.rows(), rhs.cols());
  for (auto it = post_order_.rbegin(); it != post_order_.rend(); ++it) {
    const Node& node = nodes_[static_cast<size_t>(*it)];
    auto panel = x.middleRows(node.first_row, node.rows);
    if (node.parent < 0) {
      panel = propagated.middleRows(node.first_row, node.rows);
    } else {
      const Node& par = nodes_[static_cast<size_t>(node.parent)];
      panel.noalias() =
          propagated.middleRows(node.first_row, node.rows) -
          node.dinv *
              (node.to_parent * x.middleRows(par.first_row, par.rows));
    }
  }
  return x;
}

}  // namespace gridsense
