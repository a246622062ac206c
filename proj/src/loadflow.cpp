#include "gridsense/loadflow.hpp"

#include <Eigen/SparseLU>
#include <cmath>

namespace gridsense {

namespace {

Eigen::VectorXcd slack_vector(const NetworkModel& net, const IndexMap& index,
                              const LoadflowOptions& options) {
  Eigen::VectorXcd slack = Eigen::VectorXcd::Zero(index.size());
  for (int s : index.slack_indices()) {
    BusPhase bp = index.at(s);
    slack[s] = net.slack_phasor(net.bus_at(bp.bus), bp.phase);
  }
  if (options.slack_override) {
    for (int s : index.slack_indices()) slack[s] = (*options.slack_override)[s];
  }
  return slack;
}

Eigen::VectorXcd injection_vector(const NetworkModel& net,
                                  const IndexMap& index,
                                  const LoadflowOptions& options) {
  Eigen::VectorXcd inj = Eigen::VectorXcd::Zero(index.size());
  if (options.injection_override) {
    inj = *options.injection_override;
  } else {
    for (int i : index.pq_indices()) {
      BusPhase bp = index.at(i);
      inj[i] = net.bus_at(bp.bus).injection[static_cast<int>(bp.phase)];
    }
  }
  for (int s : index.slack_indices()) inj[s] = Complex(0.0, 0.0);
  return inj;
}

/// Complex residual per pq equation: conj(S_inj) - conj(E_i) * (Y E)_i,
/// with S_inj = -S_absorbed.
Eigen::VectorXcd residual(const Eigen::VectorXcd& voltage,
                          const Eigen::VectorXcd& absorbed,
                          const CompoundAdmittance& y,
                          const IndexMap& index) {
  Eigen::VectorXcd current = y.matrix * voltage;
  Eigen::VectorXcd r(index.n_pq());
  const auto& pq = index.pq_indices();
  for (size_t k = 0; k < pq.size(); ++k) {
    int i = pq[k];
    r[static_cast<Eigen::Index>(k)] =
        std::conj(-absorbed[i]) - std::conj(voltage[i]) * current[i];
  }
  return r;
}

}  // namespace

OperatingPoint solve_loadflow(const NetworkModel& net,
                              const CompoundAdmittance& y,
                              const IndexMap& index,
                              const LoadflowOptions& options) {
  const int m = index.size();
  const int n = index.n_pq();
  if (y.dimension != m)
    throw ArgumentError("admittance dimension does not match index map");

  OperatingPoint op;
  op.injection = injection_vector(net, index, options);

  Eigen::VectorXcd slack = slack_vector(net, index, options);
  Eigen::VectorXcd voltage(m);
  if (options.initial_voltages) {
    voltage = *options.initial_voltages;
  } else {
    // flat start: slack magnitude of the same phase, nominal angle
    for (int i = 0; i < m; ++i) {
      Phase p = index.at(i).phase;
      double mag = 1.0;
      for (int s : index.slack_indices()) {
        if (index.at(s).phase == p) {
          mag = std::abs(slack[s]);
          break;
        }
      }
      voltage[i] = std::polar(mag, deg_to_rad(nominal_angle_deg(p)));
    }
  }
  for (int s : index.slack_indices()) voltage[s] = slack[s];

  const auto& pq = index.pq_indices();

  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    Eigen::VectorXcd r = residual(voltage, op.injection, y, index);
    double mismatch = 0.0;
    for (int k = 0; k < n; ++k) mismatch = std::max(mismatch, std::abs(r[k]));
    op.mismatch_trace.push_back(mismatch);
    op.max_mismatch = mismatch;
    op.iterations = iter;
    if (mismatch <= options.tolerance) {
      op.converged = true;
      break;
    }
    if (iter == options.max_iterations) break;

    // Newton step on the rectangular unknowns (Re E, Im E) per pq index.
    Eigen::VectorXcd current = y.matrix * voltage;
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<size_t>(y.matrix.nonZeros()) * 4 + 4u * n);
    for (int col = 0; col < y.matrix.outerSize(); ++col) {
      int jp = index.pq_position(col);
      if (jp < 0) continue;
      for (Eigen::SparseMatrix<Complex>::InnerIterator it(y.matrix, col); it;
           ++it) {
        int ip = index.pq_position(static_cast<int>(it.row()));
        if (ip < 0) continue;
        Complex cij = std::conj(voltage[it.row()]) * it.value();
        triplets.emplace_back(2 * ip, 2 * jp, cij.real());
        triplets.emplace_back(2 * ip, 2 * jp + 1, -cij.imag());
        triplets.emplace_back(2 * ip + 1, 2 * jp, cij.imag());
        triplets.emplace_back(2 * ip + 1, 2 * jp + 1, cij.real());
      }
    }
    for (int k = 0; k < n; ++k) {
      Complex inj_current = current[pq[k]];
      triplets.emplace_back(2 * k, 2 * k, inj_current.real());
      triplets.emplace_back(2 * k, 2 * k + 1, inj_current.imag());
      triplets.emplace_back(2 * k + 1, 2 * k, inj_current.imag());
      triplets.emplace_back(2 * k + 1, 2 * k + 1, -inj_current.real());
    }
    Eigen::SparseMatrix<double> jac(2 * n, 2 * n);
    jac.setFromTriplets(triplets.begin(), triplets.end());

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(jac);
    if (lu.info() != Eigen::Success)
      throw NumericalError("singular Newton step in load flow");

    Eigen::VectorXd rhs(2 * n);
    for (int k = 0; k < n; ++k) {
      rhs[2 * k] = r[k].real();
      rhs[2 * k + 1] = r[k].imag();
    }
    Eigen::VectorXd step = lu.solve(rhs);
    for (int k = 0; k < n; ++k)
      voltage[pq[k]] += Complex(step[2 * k], step[2 * k + 1]);
  }

  op.voltage = std::move(voltage);
  return op;
}

OperatingPoint operating_point_from_voltages(const NetworkModel& net,
                                             const CompoundAdmittance& y,
                                             const IndexMap& index,
                                             const Eigen::VectorXcd& voltages) {
  (void)net;
  if (voltages.size() != index.size())
    throw ArgumentError("voltage vector size does not match index map");
  OperatingPoint op;
  op.voltage = voltages;
  op.injection = Eigen::VectorXcd::Zero(index.size());
  Eigen::VectorXcd current = y.matrix * voltages;
  for (int i : index.pq_indices())
    op.injection[i] = -voltages[i] * std::conj(current[i]);
  op.converged = true;
  op.max_mismatch = 0.0;
  return op;
}

Complex injected_power(const OperatingPoint& op, const CompoundAdmittance& y,
                       int index) {
  Complex current = (y.matrix * op.voltage)(index);
  return op.voltage[index] * std::conj(current);
}

Eigen::VectorXcd power_mismatch(const OperatingPoint& op,
                                const CompoundAdmittance& y,
                                const IndexMap& index) {
  return residual(op.voltage, op.injection, y, index);
}

std::vector<Eigen::VectorXcd> branch_currents(const OperatingPoint& op,
                                              const CompoundAdmittance& y,
                                              bool include_sending_shunt) {
  std::vector<Eigen::VectorXcd> out;
  out.reserve(y.branch.size());
  for (const auto& blocks : y.branch) {
    const int p = static_cast<int>(blocks.from_index.size());
    Eigen::VectorXcd from(p), to(p);
    for (int s = 0; s < p; ++s) {
      from[s] = op.voltage[blocks.from_index[s]];
      to[s] = op.voltage[blocks.to_index[s]];
    }
    Eigen::VectorXcd current = blocks.series * (from - to);
    if (include_sending_shunt) current += blocks.shunt_half * from;
    out.push_back(std::move(current));
  }
  return out;
}

Complex total_losses(const OperatingPoint& op, const CompoundAdmittance& y) {
  Complex total(0.0, 0.0);
  for (const auto& blocks : y.branch) {
    const int p = static_cast<int>(blocks.from_index.size());
    Eigen::VectorXcd from(p), to(p);
    for (int s = 0; s < p; ++s) {
      from[s] = op.voltage[blocks.from_index[s]];
      to[s] = op.voltage[blocks.to_index[s]];
    }
    Eigen::VectorXcd series_current = blocks.series * (from - to);
    Eigen::VectorXcd shunt_from = blocks.shunt_half * from;
    Eigen::VectorXcd shunt_to = blocks.shunt_half * to;
    for (int s = 0; s < p; ++s) {
      total += (from[s] - to[s]) * std::conj(series_current[s]);
      total += from[s] * std::conj(shunt_from[s]);
      total += to[s] * std::conj(shunt_to[s]);
    }
  }
  return total;
}

Complex total_injected(const OperatingPoint& op, const CompoundAdmittance& y) {
  Eigen::VectorXcd current = y.matrix * op.voltage;
  Complex total(0.0, 0.0);
  for (Eigen::Index i = 0; i < op.voltage.size(); ++i)
    total += op.voltage[i] * std::conj(current[i]);
  return total;
}

}  // namespace gridsense
