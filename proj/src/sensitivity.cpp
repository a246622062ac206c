#include "gridsense/sensitivity.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <map>
#include <optional>
#include <thread>

#include "tree_solver.hpp"

namespace gridsense {

struct SensitivitySystem::Factorization {
  // radial path: leaf-first block elimination; general path: sparse LU
  std::optional<RadialBlockSolver> tree;
  std::optional<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu;
};

SensitivitySystem::SensitivitySystem(const OperatingPoint& op,
                                     const CompoundAdmittance& y,
                                     const IndexMap& index)
    : index_(index), n_(index.n_pq()), voltage_(op.voltage) {
  if (op.voltage.size() != index.size())
    throw ArgumentError("operating point does not match index map");

  // The coefficient of the conjugate unknown is the injected current
  // sum_j Y_ij E_j evaluated at the operating point.
  Eigen::VectorXcd current = y.matrix * voltage_;

  triplets_.reserve(static_cast<size_t>(y.matrix.nonZeros()) * 4 +
                    4u * static_cast<size_t>(n_));
  for (int col = 0; col < y.matrix.outerSize(); ++col) {
    int jp = index_.pq_position(col);
    if (jp < 0) continue;
    for (Eigen::SparseMatrix<Complex>::InnerIterator it(y.matrix, col); it;
         ++it) {
      int ip = index_.pq_position(static_cast<int>(it.row()));
      if (ip < 0) continue;
      Complex cij = std::conj(voltage_[it.row()]) * it.value();
      triplets_.emplace_back(2 * ip, 2 * jp, cij.real());
      triplets_.emplace_back(2 * ip, 2 * jp + 1, -cij.imag());
      triplets_.emplace_back(2 * ip + 1, 2 * jp, cij.imag());
      triplets_.emplace_back(2 * ip + 1, 2 * jp + 1, cij.real());
    }
  }
  const auto& pq = index_.pq_indices();
  for (int k = 0; k < n_; ++k) {
    Complex inj = current[pq[k]];
    triplets_.emplace_back(2 * k, 2 * k, inj.real());
    triplets_.emplace_back(2 * k, 2 * k + 1, inj.imag());
    triplets_.emplace_back(2 * k + 1, 2 * k, inj.imag());
    triplets_.emplace_back(2 * k + 1, 2 * k + 1, -inj.real());
  }

  // Tap right-hand sides -conj(E_i) Y_ik e^{j theta_k} are fixed by the
  // operating point; precompute one per slack column.
  tap_rhs_.assign(static_cast<size_t>(index_.n_slack()),
                  Eigen::VectorXd::Zero(2 * n_));
  for (int sp = 0; sp < index_.n_slack(); ++sp) {
    int k = index_.slack_indices()[sp];
    double mag = std::abs(voltage_[k]);
    if (mag == 0.0) continue;  // degenerate slack; rhs_tap will reject
    Complex unit = voltage_[k] / mag;
    Eigen::VectorXd& rhs = tap_rhs_[static_cast<size_t>(sp)];
    for (Eigen::SparseMatrix<Complex>::InnerIterator it(y.matrix, k); it;
         ++it) {
      int ip = index_.pq_position(static_cast<int>(it.row()));
      if (ip < 0) continue;
      Complex b = -std::conj(voltage_[it.row()]) * it.value() * unit;
      rhs[2 * ip] += b.real();
      rhs[2 * ip + 1] += b.imag();
    }
  }

  auto fact = std::make_shared<Factorization>();

  // group equation rows by pq bus and collect bus-level adjacency; when
  // the pq graph is a forest (every radial network) the block elimination
  // needs no fill and is far cheaper than a general sparse LU
  std::map<int, int> node_by_bus;
  std::vector<int> node_of(static_cast<size_t>(2 * n_), 0);
  for (int k = 0; k < n_; ++k) {
    int bus = index_.at(pq[k]).bus;
    auto [it, inserted] =
        node_by_bus.emplace(bus, static_cast<int>(node_by_bus.size()));
    node_of[static_cast<size_t>(2 * k)] = it->second;
    node_of[static_cast<size_t>(2 * k + 1)] = it->second;
    (void)inserted;
  }
  std::vector<std::pair<int, int>> adjacency;
  for (const auto& blocks : y.branch) {
    if (blocks.from_index.empty()) continue;
    int from_bus = index_.at(blocks.from_index[0]).bus;
    int to_bus = index_.at(blocks.to_index[0]).bus;
    auto fi = node_by_bus.find(from_bus);
    auto ti = node_by_bus.find(to_bus);
    if (fi != node_by_bus.end() && ti != node_by_bus.end())
      adjacency.emplace_back(fi->second, ti->second);
  }

  if (n_ > 0) {
    RadialBlockSolver tree(triplets_, 2 * n_,
                           node_of, static_cast<int>(node_by_bus.size()),
                           adjacency);
    if (tree.applicable() && tree.factorized())
      fact->tree.emplace(std::move(tree));
  }

  if (!fact->tree) {
    fact->lu.emplace();
    fact->lu->compute(matrix());
    if (fact->lu->info() != Eigen::Success)
      throw NumericalError(
          "sensitivity system is numerically singular; uniqueness is only "
          "guaranteed for radial networks at a non-degenerate operating "
          "point");
  }
  lu_ = std::move(fact);
  factorizations_ = 1;
}

const Eigen::SparseMatrix<double>& SensitivitySystem::matrix() const {
  std::call_once(matrix_once_, [this] {
    matrix_.resize(2 * n_, 2 * n_);
    matrix_.setFromTriplets(triplets_.begin(), triplets_.end());
    matrix_.makeCompressed();
  });
  return matrix_;
}

Eigen::VectorXd SensitivitySystem::rhs_dp(BusPhase l) const {
  int idx = index_.index_of(l);
  int pos = index_.pq_position(idx);
  if (pos < 0)
    throw ArgumentError("bus " + std::to_string(l.bus) + " phase " +
                        std::string(1, phase_char(l.phase)) +
                        " is a slack index; dP columns require a pq index");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * n_);
  rhs[2 * pos] = 1.0;
  return rhs;
}

Eigen::VectorXd SensitivitySystem::rhs_dq(BusPhase l) const {
  int idx = index_.index_of(l);
  int pos = index_.pq_position(idx);
  if (pos < 0)
    throw ArgumentError("bus " + std::to_string(l.bus) + " phase " +
                        std::string(1, phase_char(l.phase)) +
                        " is a slack index; dQ columns require a pq index");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * n_);
  rhs[2 * pos + 1] = -1.0;
  return rhs;
}

Eigen::VectorXd SensitivitySystem::rhs_tap(BusPhase k) const {
  int kidx = index_.index_of(k);
  int sp = index_.slack_position(kidx);
  if (sp < 0)
    throw ArgumentError("bus " + std::to_string(k.bus) + " phase " +
                        std::string(1, phase_char(k.phase)) +
                        " is not a slack index; tap columns require one");
  if (std::abs(voltage_[kidx]) == 0.0)
    throw NumericalError("slack voltage magnitude is zero; tap sensitivity "
                         "is undefined");
  return tap_rhs_[static_cast<size_t>(sp)];
}

Eigen::VectorXd SensitivitySystem::solve_raw(const Eigen::VectorXd& rhs) const {
  return solve_raw_batch(rhs).col(0);
}

Eigen::MatrixXd SensitivitySystem::solve_raw_batch(
    const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != 2 * n_)
    throw ArgumentError("right-hand side does not match the system size");
  if (lu_->tree) return lu_->tree->solve(rhs);
  Eigen::MatrixXd x = lu_->lu->solve(rhs);
  if (lu_->lu->info() != Eigen::Success)
    throw NumericalError("sensitivity back-substitution failed");
  return x;
}

bool SensitivitySystem::using_tree_solver() const {
  return lu_ && lu_->tree.has_value();
}

Eigen::VectorXcd SensitivitySystem::expand(const Eigen::VectorXd& x) const {
  Eigen::VectorXcd column = Eigen::VectorXcd::Zero(index_.size());
  const auto& pq = index_.pq_indices();
  for (int k = 0; k < n_; ++k)
    column[pq[k]] = Complex(x[2 * k], x[2 * k + 1]);
  return column;
}

Eigen::VectorXcd SensitivitySystem::solve_dp(BusPhase l) const {
  return expand(solve_raw(rhs_dp(l)));
}

Eigen::VectorXcd SensitivitySystem::solve_dq(BusPhase l) const {
  return expand(solve_raw(rhs_dq(l)));
}

Eigen::VectorXcd SensitivitySystem::solve_tap(BusPhase k) const {
  return expand(solve_raw(rhs_tap(k)));
}

double SensitivitySystem::solve_residual(const Eigen::VectorXd& rhs,
                                         const Eigen::VectorXd& x) const {
  return (matrix() * x - rhs).cwiseAbs().maxCoeff();
}

Eigen::VectorXd magnitude_of(const Eigen::VectorXcd& column,
                             const Eigen::VectorXcd& voltage) {
  if (column.size() != voltage.size())
    throw ArgumentError("column/voltage size mismatch");
  Eigen::VectorXd out(column.size());
  for (Eigen::Index i = 0; i < column.size(); ++i) {
    double mag = std::abs(voltage[i]);
    if (mag == 0.0)
      throw NumericalError("voltage magnitude is zero at index " +
                           std::to_string(i) +
                           "; magnitude sensitivity undefined");
    out[i] = (std::conj(voltage[i]) * column[i]).real() / mag;
  }
  return out;
}

CurrentSensitivities current_sens(const VoltageSensitivities& volt,
                                  const CompoundAdmittance& y,
                                  const OperatingPoint& op,
                                  bool include_sending_shunt,
                                  double epsilon_current) {
  CurrentSensitivities out;
  out.epsilon = epsilon_current;
  const int n = static_cast<int>(volt.dE_dP.cols());

  std::vector<Eigen::VectorXcd> currents =
      branch_currents(op, y, include_sending_shunt);

  for (size_t b = 0; b < y.branch.size(); ++b) {
    const auto& blocks = y.branch[b];
    const int p = static_cast<int>(blocks.from_index.size());

    Eigen::MatrixXcd dfrom_p(p, n), dto_p(p, n), dfrom_q(p, n), dto_q(p, n);
    for (int s = 0; s < p; ++s) {
      dfrom_p.row(s) = volt.dE_dP.row(blocks.from_index[s]);
      dto_p.row(s) = volt.dE_dP.row(blocks.to_index[s]);
      dfrom_q.row(s) = volt.dE_dQ.row(blocks.from_index[s]);
      dto_q.row(s) = volt.dE_dQ.row(blocks.to_index[s]);
    }
    Eigen::MatrixXcd dI_p = blocks.series * (dfrom_p - dto_p);
    Eigen::MatrixXcd dI_q = blocks.series * (dfrom_q - dto_q);
    if (include_sending_shunt) {
      dI_p += blocks.shunt_half * dfrom_p;
      dI_q += blocks.shunt_half * dfrom_q;
    }

    Eigen::MatrixXd mag_p = Eigen::MatrixXd::Zero(p, n);
    Eigen::MatrixXd mag_q = Eigen::MatrixXd::Zero(p, n);
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> valid(p, n);
    for (int s = 0; s < p; ++s) {
      double imag = std::abs(currents[b][s]);
      bool ok = imag >= epsilon_current;
      for (int c = 0; c < n; ++c) {
        valid(s, c) = ok;
        if (ok) {
          mag_p(s, c) =
              (std::conj(currents[b][s]) * dI_p(s, c)).real() / imag;
          mag_q(s, c) =
              (std::conj(currents[b][s]) * dI_q(s, c)).real() / imag;
        }
      }
    }

    out.dI_dP.push_back(std::move(dI_p));
    out.dI_dQ.push_back(std::move(dI_q));
    out.dmag_dP.push_back(std::move(mag_p));
    out.dmag_dQ.push_back(std::move(mag_q));
    out.valid.push_back(std::move(valid));
  }
  return out;
}

SensitivitySet full_sensitivity(const OperatingPoint& op,
                                const CompoundAdmittance& y,
                                const NetworkModel& net, const IndexMap& index,
                                int threads) {
  SensitivitySystem sys(op, y, index);
  const int m = index.size();
  const int n = index.n_pq();
  const int s = index.n_slack();

  SensitivitySet set;
  set.voltage.dE_dP.resize(m, n);
  set.voltage.dE_dQ.resize(m, n);
  set.tap.W.resize(m, s);

  // one right-hand side per column: N for P, N for Q, S for taps
  const int jobs = 2 * n + s;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(2 * n, jobs);
  for (int k = 0; k < n; ++k) {
    rhs(2 * k, k) = 1.0;
    rhs(2 * k + 1, n + k) = -1.0;
  }
  for (int sp = 0; sp < s; ++sp)
    rhs.col(2 * n + sp) =
        sys.rhs_tap(index.at(index.slack_indices()[sp]));

  Eigen::MatrixXd solution(2 * n, jobs);
  auto solve_cols = [&](int begin, int end) {
    solution.middleCols(begin, end - begin) =
        sys.solve_raw_batch(rhs.middleCols(begin, end - begin));
  };
  threads = std::max(1, std::min(threads, jobs));
  if (threads == 1 || jobs == 0) {
    if (jobs > 0) solve_cols(0, jobs);
  } else {
    std::vector<std::thread> pool;
    int chunk = (jobs + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      int begin = t * chunk;
      int end = std::min(jobs, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(solve_cols, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  for (int k = 0; k < n; ++k) {
    set.voltage.dE_dP.col(k) = sys.expand(solution.col(k));
    set.voltage.dE_dQ.col(k) = sys.expand(solution.col(n + k));
  }
  for (int sp = 0; sp < s; ++sp)
    set.tap.W.col(sp) = sys.expand(solution.col(2 * n + sp));

  set.voltage.dmag_dP.resize(m, n);
  set.voltage.dmag_dQ.resize(m, n);
  for (int c = 0; c < n; ++c) {
    set.voltage.dmag_dP.col(c) = magnitude_of(set.voltage.dE_dP.col(c), op.voltage);
    set.voltage.dmag_dQ.col(c) = magnitude_of(set.voltage.dE_dQ.col(c), op.voltage);
  }

  set.tap.dmag_dslack.resize(m, s);
  set.tap.dmag_dtap = Eigen::MatrixXd::Zero(m, s);
  set.tap.has_tap.assign(static_cast<size_t>(s), false);
  for (int c = 0; c < s; ++c) {
    set.tap.dmag_dslack.col(c) = magnitude_of(set.tap.W.col(c), op.voltage);
    BusPhase k = index.at(index.slack_indices()[c]);
    if (net.tap && net.tap->slack_bus == k.bus) {
      const Bus& bus = net.bus_at(k.bus);
      double rated = std::abs(bus.slack_voltage[static_cast<int>(k.phase)]);
      set.tap.dmag_dtap.col(c) =
          set.tap.dmag_dslack.col(c) * (rated * net.tap->step);
      set.tap.has_tap[static_cast<size_t>(c)] = true;
    }
  }

  set.current = current_sens(set.voltage, y, op);
  set.factorizations = sys.factorization_count();
  return set;
}

}  // namespace gridsense
