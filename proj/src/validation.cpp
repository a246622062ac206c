#include "gridsense/validation.hpp"

#include <cmath>
#include <limits>

namespace gridsense {

namespace {

double error_measure(double analytical, double reference, double rel_floor) {
  double diff = std::abs(analytical - reference);
  if (std::abs(reference) >= rel_floor) return diff / std::abs(reference);
  return diff;
}

}  // namespace

std::vector<ValidationRow> validate_sensitivities(
    const NetworkModel& net, const CompoundAdmittance& y, const IndexMap& index,
    const OperatingPoint& op, const ValidationOptions& options) {
  const double nan = std::numeric_limits<double>::quiet_NaN();

  SensitivitySet sens = full_sensitivity(op, y, net, index);
  JacobianTables jac = jacobian_sensitivities(y, index, op);
  std::vector<Eigen::VectorXcd> currents = branch_currents(op, y);

  std::vector<ValidationRow> rows;

  const int m = index.size();
  const auto& pq = index.pq_indices();
  for (size_t lp = 0; lp < pq.size(); ++lp) {
    BusPhase l = index.at(pq[lp]);
    for (PerturbTarget target :
         {PerturbTarget::active_power, PerturbTarget::reactive_power}) {
      PerturbationSpec spec;
      spec.target = target;
      spec.at = l;
      spec.delta = options.delta;
      OracleColumn numeric = fd_oracle(net, y, index, op, spec);
      bool is_p = target == PerturbTarget::active_power;
      const Eigen::MatrixXd& analytical_mag =
          is_p ? sens.voltage.dmag_dP : sens.voltage.dmag_dQ;
      const Eigen::MatrixXd& jacobian_mag = is_p ? jac.dmag_dP : jac.dmag_dQ;

      for (int i = 0; i < m; ++i) {
        ValidationRow row;
        row.kind = is_p ? ValidationRow::Kind::voltage_p
                        : ValidationRow::Kind::voltage_q;
        row.i = index.at(i);
        row.l = l;
        row.analytical = analytical_mag(i, static_cast<int>(lp));
        row.oracle = numeric.dmag[i];
        row.jacobian = jacobian_mag(i, static_cast<int>(lp));
        row.err_oracle =
            error_measure(row.analytical, row.oracle, options.rel_floor_oracle);
        row.err_jacobian = error_measure(row.analytical, row.jacobian,
                                         options.rel_floor_jacobian);
        rows.push_back(row);
      }

      for (size_t b = 0; b < y.branch.size(); ++b) {
        const Branch& br = net.branches[b];
        const auto& analytical_cur =
            is_p ? sens.current.dmag_dP[b] : sens.current.dmag_dQ[b];
        for (int s = 0; s < br.phases.count(); ++s) {
          if (std::abs(currents[b][s]) < options.current_floor) continue;
          ValidationRow row;
          row.kind = is_p ? ValidationRow::Kind::current_p
                          : ValidationRow::Kind::current_q;
          row.i = BusPhase{br.from, br.phases.at(s)};
          row.j_bus = br.to;
          row.l = l;
          row.analytical = analytical_cur(s, static_cast<int>(lp));
          row.oracle = numeric.dcurrent_mag[b][s];
          row.jacobian = nan;
          row.err_oracle = error_measure(row.analytical, row.oracle,
                                         options.rel_floor_oracle);
          row.err_jacobian = nan;
          rows.push_back(row);
        }
      }
    }
  }

  const auto& slack = index.slack_indices();
  for (size_t kp = 0; kp < slack.size(); ++kp) {
    BusPhase k = index.at(slack[kp]);
    PerturbationSpec spec;
    spec.target = PerturbTarget::slack_magnitude;
    spec.at = k;
    spec.delta = options.delta;
    OracleColumn numeric = fd_oracle(net, y, index, op, spec);
    for (int i : index.pq_indices()) {
      ValidationRow row;
      row.kind = ValidationRow::Kind::tap;
      row.i = index.at(i);
      row.l = k;
      row.analytical = sens.tap.dmag_dslack(i, static_cast<int>(kp));
      row.oracle = numeric.dmag[i];
      row.jacobian = nan;
      row.err_oracle =
          error_measure(row.analytical, row.oracle, options.rel_floor_oracle);
      row.err_jacobian = nan;
      rows.push_back(row);
    }
  }

  return rows;
}

}  // namespace gridsense
