#include "gridsense/baselines.hpp"

#include <Eigen/Dense>
#include <chrono>
#include <cmath>

#include "gridsense/sensitivity.hpp"

namespace gridsense {

namespace {

struct ProbeResult {
  Eigen::VectorXd mag;
  std::vector<Eigen::VectorXd> current_mag;
};

ProbeResult probe(const NetworkModel& net, const CompoundAdmittance& y,
                  const IndexMap& index, const OperatingPoint& base,
                  const PerturbationSpec& spec, double offset) {
  LoadflowOptions options;
  options.tolerance = 1e-12;
  options.max_iterations = 60;
  options.initial_voltages = base.voltage;

  Eigen::VectorXcd injections = base.injection;
  Eigen::VectorXcd slack = Eigen::VectorXcd::Zero(index.size());
  for (int s : index.slack_indices()) slack[s] = base.voltage[s];

  int target = index.index_of(spec.at);
  switch (spec.target) {
    case PerturbTarget::active_power:
      if (index.pq_position(target) < 0)
        throw ArgumentError("power perturbation target must be a pq index");
      // stored injections are absorption-positive; +offset of injected
      // power is -offset of absorption
      injections[target] -= Complex(offset, 0.0);
      break;
    case PerturbTarget::reactive_power:
      if (index.pq_position(target) < 0)
        throw ArgumentError("power perturbation target must be a pq index");
      injections[target] -= Complex(0.0, offset);
      break;
    case PerturbTarget::slack_magnitude: {
      if (index.pq_position(target) >= 0)
        throw ArgumentError("slack perturbation target must be a slack index");
      double mag = std::abs(slack[target]);
      if (mag == 0.0) throw NumericalError("slack magnitude is zero");
      slack[target] *= (mag + offset) / mag;
      break;
    }
  }
  options.injection_override = std::move(injections);
  options.slack_override = std::move(slack);

  OperatingPoint op = solve_loadflow(net, y, index, options);
  if (!op.converged)
    throw NumericalError(
        "perturbed load flow did not converge; use a smaller delta");

  ProbeResult r;
  r.mag = op.voltage.cwiseAbs();
  for (const Eigen::VectorXcd& c : branch_currents(op, y))
    r.current_mag.push_back(c.cwiseAbs());
  return r;
}

double mean_of(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double ci95_of(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  double stdev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return 1.96 * stdev / std::sqrt(static_cast<double>(xs.size()));
}

}  // namespace

OracleColumn fd_oracle(const NetworkModel& net, const CompoundAdmittance& y,
                       const IndexMap& index, const OperatingPoint& base,
                       const PerturbationSpec& spec) {
  if (spec.delta <= 0.0) throw ArgumentError("perturbation delta must be > 0");

  ProbeResult plus = probe(net, y, index, base, spec, spec.delta);
  ProbeResult minus;
  double width = 0.0;
  if (spec.scheme == FdScheme::central) {
    minus = probe(net, y, index, base, spec, -spec.delta);
    width = 2.0 * spec.delta;
  } else {
    minus.mag = base.voltage.cwiseAbs();
    for (const Eigen::VectorXcd& c : branch_currents(base, y))
      minus.current_mag.push_back(c.cwiseAbs());
    width = spec.delta;
  }

  OracleColumn out;
  out.dmag = (plus.mag - minus.mag) / width;
  for (size_t b = 0; b < plus.current_mag.size(); ++b)
    out.dcurrent_mag.push_back((plus.current_mag[b] - minus.current_mag[b]) /
                               width);
  return out;
}

/// Polar-coordinate Newton-Raphson Jacobian over the pq indices:
/// rows [P; Q], columns [V; theta]. Trigonometric kernels come from
/// E_i * conj(E_j) products.
Eigen::MatrixXd polar_jacobian(const CompoundAdmittance& y,
                               const IndexMap& index,
                               const OperatingPoint& op) {
  const int m = index.size();
  const int n = index.n_pq();
  if (n == 0) throw ArgumentError("network has no pq indices");

  // injected P, Q at the operating point
  Eigen::VectorXcd current = y.matrix * op.voltage;
  Eigen::VectorXcd power(m);
  for (int i = 0; i < m; ++i)
    power[i] = op.voltage[i] * std::conj(current[i]);

  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * n, 2 * n);

  for (int col = 0; col < y.matrix.outerSize(); ++col) {
    int jp = index.pq_position(col);
    if (jp < 0) continue;
    double vj = std::abs(op.voltage[col]);
    for (Eigen::SparseMatrix<Complex>::InnerIterator it(y.matrix, col); it;
         ++it) {
      int i = static_cast<int>(it.row());
      int ip = index.pq_position(i);
      if (ip < 0 || i == col) continue;
      double g = it.value().real();
      double b = it.value().imag();
      Complex t = op.voltage[i] * std::conj(op.voltage[col]);
      double vv_h = g * t.real() + b * t.imag();   // V_i V_j (G cos + B sin)
      double vv_u = g * t.imag() - b * t.real();   // V_i V_j (G sin - B cos)
      jac(ip, jp) = vv_h / vj;            // dP_i/dV_j
      jac(ip, n + jp) = vv_u;             // dP_i/dtheta_j
      jac(n + ip, jp) = vv_u / vj;        // dQ_i/dV_j
      jac(n + ip, n + jp) = -vv_h;        // dQ_i/dtheta_j
    }
  }

  const auto& pq = index.pq_indices();
  for (int k = 0; k < n; ++k) {
    int i = pq[k];
    double vi = std::abs(op.voltage[i]);
    Complex yii = y.matrix.coeff(i, i);
    double pi = power[i].real();
    double qi = power[i].imag();
    jac(k, k) = pi / vi + yii.real() * vi;
    jac(k, n + k) = -qi - yii.imag() * vi * vi;
    jac(n + k, k) = qi / vi - yii.imag() * vi;
    jac(n + k, n + k) = pi - yii.real() * vi * vi;
  }
  return jac;
}

JacobianTables jacobian_sensitivities(const CompoundAdmittance& y,
                                      const IndexMap& index,
                                      const OperatingPoint& op) {
  const int m = index.size();
  const int n = index.n_pq();
  Eigen::MatrixXd jac = polar_jacobian(y, index, op);

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
  Eigen::MatrixXd inverse = lu.inverse();
  if (!inverse.allFinite())
    throw NumericalError("load-flow Jacobian is singular");

  const auto& pq = index.pq_indices();
  JacobianTables tables;
  tables.dmag_dP = Eigen::MatrixXd::Zero(m, n);
  tables.dmag_dQ = Eigen::MatrixXd::Zero(m, n);
  tables.dtheta_dP = Eigen::MatrixXd::Zero(m, n);
  tables.dtheta_dQ = Eigen::MatrixXd::Zero(m, n);
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) {
      tables.dmag_dP(pq[k], l) = inverse(k, l);
      tables.dmag_dQ(pq[k], l) = inverse(k, n + l);
      tables.dtheta_dP(pq[k], l) = inverse(n + k, l);
      tables.dtheta_dQ(pq[k], l) = inverse(n + k, n + l);
    }
  }
  return tables;
}

BenchmarkReport benchmark(const CompoundAdmittance& y, const IndexMap& index,
                          const OperatingPoint& op, int repetitions,
                          const std::string& feeder_id) {
  if (repetitions < 30)
    throw ArgumentError("benchmark needs at least 30 repetitions");
  const int n = index.n_pq();
  const auto& pq = index.pq_indices();

  // timed deliverable: the pq x N magnitude table d|E|/dP.
  // Route one: build the Newton-Raphson Jacobian, invert the 2N x 2N
  // matrix in full (the method has no cheaper way to expose the
  // sensitivities), extract the submatrix.
  auto run_jacobian = [&]() {
    Eigen::MatrixXd jac = polar_jacobian(y, index, op);
    Eigen::MatrixXd inverse =
        Eigen::PartialPivLU<Eigen::MatrixXd>(jac).inverse();
    Eigen::MatrixXd out = inverse.topLeftCorner(n, n);
    return out;
  };
  // Route two: build the rectangular system, factorize once, back-solve
  // one unit column per pq bus-phase, convert to magnitudes.
  auto run_analytical = [&]() {
    SensitivitySystem sys(op, y, index);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(2 * n, n);
    for (int k = 0; k < n; ++k) rhs(2 * k, k) = 1.0;
    Eigen::MatrixXd solution = sys.solve_raw_batch(rhs);
    Eigen::MatrixXd out(n, n);
    for (int k = 0; k < n; ++k) {
      int i = pq[k];
      double e = op.voltage[i].real();
      double f = op.voltage[i].imag();
      double vi = std::abs(op.voltage[i]);
      for (int l = 0; l < n; ++l)
        out(k, l) =
            (e * solution(2 * k, l) + f * solution(2 * k + 1, l)) / vi;
    }
    return out;
  };

  // methods must agree before their timings mean anything
  Eigen::MatrixXd ref_jac = run_jacobian();
  Eigen::MatrixXd ref_ana = run_analytical();
  double worst = 0.0;
  for (int r = 0; r < ref_jac.rows(); ++r)
    for (int c = 0; c < ref_jac.cols(); ++c) {
      double denom = std::max(std::abs(ref_ana(r, c)), 1e-3);
      worst = std::max(worst,
                       std::abs(ref_jac(r, c) - ref_ana(r, c)) / denom);
    }
  if (worst > 1e-5)
    throw NumericalError(
        "jacobian and analytical sensitivities disagree; benchmark aborted");

  using clock = std::chrono::steady_clock;
  auto time_ms = [](auto&& fn) {
    auto t0 = clock::now();
    auto result = fn();
    auto t1 = clock::now();
    volatile double sink = result(0, 0);
    (void)sink;
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
  };

  std::vector<double> jacobian_ms, analytical_ms;
  jacobian_ms.reserve(repetitions);
  analytical_ms.reserve(repetitions);
  for (int r = 0; r < repetitions; ++r)
    jacobian_ms.push_back(time_ms(run_jacobian));
  for (int r = 0; r < repetitions; ++r)
    analytical_ms.push_back(time_ms(run_analytical));

  BenchmarkReport report;
  report.feeder_id = feeder_id;
  report.n_pq = n;
  report.m = index.size();
  report.repetitions = repetitions;
  report.jacobian_mean_ms = mean_of(jacobian_ms);
  report.jacobian_ci_ms = ci95_of(jacobian_ms, report.jacobian_mean_ms);
  report.analytical_mean_ms = mean_of(analytical_ms);
  report.analytical_ci_ms = ci95_of(analytical_ms, report.analytical_mean_ms);
  report.ratio = report.jacobian_mean_ms / report.analytical_mean_ms;
  return report;
}

}  // namespace gridsense
