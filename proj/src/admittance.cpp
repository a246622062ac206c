#include "gridsense/admittance.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <tuple>

namespace gridsense {

int CompoundAdmittance::branch_index(int bus_i, int bus_j) const {
  auto key = std::minmax(bus_i, bus_j);
  auto it = pair_lookup.find({key.first, key.second});
  return it == pair_lookup.end() ? -1 : it->second;
}

CompoundAdmittance build_compound_admittance(const NetworkModel& net,
                                             const IndexMap& index) {
  CompoundAdmittance y;
  y.dimension = index.size();
  y.matrix.resize(y.dimension, y.dimension);
  y.branch.reserve(net.branches.size());

  // contributions carry a canonical key so that accumulation order, and
  // with it the matrix bit pattern, is independent of the branch order
  struct Contribution {
    int row, col;
    long key;
    Complex value;
  };
  std::vector<Contribution> contributions;

  int bi = 0;
  for (const Branch& br : net.branches) {
    const int p = br.phases.count();

    Eigen::FullPivLU<Eigen::MatrixXcd> lu(br.series_impedance);
    if (!lu.isInvertible())
      throw NumericalError("singular series impedance on branch " +
                           std::to_string(br.from) + "-" +
                           std::to_string(br.to));
    CompoundAdmittance::BranchBlocks blocks;
    blocks.series = lu.inverse();
    blocks.shunt_half = 0.5 * br.shunt_admittance;
    blocks.from_index.resize(p);
    blocks.to_index.resize(p);
    for (int s = 0; s < p; ++s) {
      Phase ph = br.phases.at(s);
      blocks.from_index[s] = index.index_of({br.from, ph});
      blocks.to_index[s] = index.index_of({br.to, ph});
    }

    auto pair = std::minmax(br.from, br.to);
    long key = static_cast<long>(pair.first) * (index.size() + 1) + pair.second;
    for (int r = 0; r < p; ++r) {
      for (int c = 0; c < p; ++c) {
        Complex ys = blocks.series(r, c);
        Complex yh = blocks.shunt_half(r, c);
        contributions.push_back(
            {blocks.from_index[r], blocks.from_index[c], key, ys + yh});
        contributions.push_back(
            {blocks.to_index[r], blocks.to_index[c], key, ys + yh});
        contributions.push_back(
            {blocks.from_index[r], blocks.to_index[c], key, -ys});
        contributions.push_back(
            {blocks.to_index[r], blocks.from_index[c], key, -ys});
      }
    }

    y.pair_lookup.emplace(std::pair<int, int>{pair.first, pair.second}, bi);
    y.branch.push_back(std::move(blocks));
    ++bi;
  }

  std::stable_sort(contributions.begin(), contributions.end(),
                   [](const Contribution& a, const Contribution& b) {
                     return std::tie(a.col, a.row, a.key) <
                            std::tie(b.col, b.row, b.key);
                   });
  std::vector<Eigen::Triplet<Complex>> triplets;
  triplets.reserve(contributions.size());
  for (size_t i = 0; i < contributions.size();) {
    size_t j = i;
    Complex sum(0.0, 0.0);
    while (j < contributions.size() &&
           contributions[j].row == contributions[i].row &&
           contributions[j].col == contributions[i].col) {
      sum += contributions[j].value;
      ++j;
    }
    triplets.emplace_back(contributions[i].row, contributions[i].col, sum);
    i = j;
  }

  y.matrix.setFromTriplets(triplets.begin(), triplets.end());
  y.matrix.makeCompressed();
  return y;
}

Eigen::MatrixXcd branch_block(const CompoundAdmittance& y, int from_bus,
                              int to_bus) {
  int bi = y.branch_index(from_bus, to_bus);
  if (bi < 0)
    throw ArgumentError("no branch between buses " + std::to_string(from_bus) +
                        " and " + std::to_string(to_bus));
  return y.branch[bi].series;
}

std::vector<AdmittanceEntry> sorted_entries(const CompoundAdmittance& y) {
  std::vector<AdmittanceEntry> out;
  out.reserve(y.matrix.nonZeros());
  for (int col = 0; col < y.matrix.outerSize(); ++col)
    for (Eigen::SparseMatrix<Complex>::InnerIterator it(y.matrix, col); it;
         ++it)
      out.push_back({static_cast<int>(it.row()), col, it.value()});
  std::sort(out.begin(), out.end(),
            [](const AdmittanceEntry& a, const AdmittanceEntry& b) {
              return std::pair(a.row, a.col) < std::pair(b.row, b.col);
            });
  return out;
}

Eigen::VectorXcd row_sums(const CompoundAdmittance& y) {
  Eigen::VectorXcd sums = Eigen::VectorXcd::Zero(y.dimension);
  for (int col = 0; col < y.matrix.outerSize(); ++col)
    for (Eigen::SparseMatrix<Complex>::InnerIterator it(y.matrix, col); it;
         ++it)
      sums[it.row()] += it.value();
  return sums;
}

}  // namespace gridsense
