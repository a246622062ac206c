#include "gridsense/control.hpp"

#include <cmath>
#include <limits>

#include "gridsense/bvls.hpp"

namespace gridsense {

namespace {

double round_ties_toward_zero(double x) {
  double mag = std::abs(x);
  double base = std::floor(mag);
  double rounded = (mag - base > 0.5) ? base + 1.0 : base;
  return std::copysign(rounded, x);
}

}  // namespace

ControlProblem build_linear_model(const SensitivitySet& sens,
                                  const NetworkModel& net,
                                  const IndexMap& index,
                                  const OperatingPoint& op,
                                  const std::vector<DerSpec>& ders,
                                  ControlMode mode, double target_pu) {
  const int m = index.size();
  ControlProblem cp;
  cp.mode = mode;
  cp.target_pu = target_pu;
  cp.ders = ders;
  cp.power_base_va = net.base_power_va;
  cp.initial_mag = op.voltage.cwiseAbs();

  std::vector<Eigen::VectorXd> columns;
  std::vector<double> lo, hi;

  const double kw_to_pu = 1e3 / net.base_power_va;

  for (size_t d = 0; d < ders.size(); ++d) {
    const DerSpec& der = ders[d];
    const Bus& bus = net.bus_at(der.bus);
    const int np = bus.phases.count();
    std::vector<int> cols;
    for (Phase p : kAllPhases) {
      if (!bus.phases.has(p)) continue;
      int idx = index.index_of({der.bus, p});
      int pos = index.pq_position(idx);
      if (pos < 0)
        throw ValidationError("DER bus " + std::to_string(der.bus) +
                              " has no sensitivity column (slack bus)");
      cols.push_back(pos);
    }

    if (mode == ControlMode::balanced_3phase) {
      Eigen::VectorXd pcol = Eigen::VectorXd::Zero(m);
      Eigen::VectorXd qcol = Eigen::VectorXd::Zero(m);
      for (int pos : cols) {
        pcol += sens.voltage.dmag_dP.col(pos);
        qcol += sens.voltage.dmag_dQ.col(pos);
      }
      pcol /= np;
      qcol /= np;
      columns.push_back(pcol);
      cp.vars.push_back({ControlVariable::Kind::der_p, static_cast<int>(d),
                         Phase::a, true, der.p_init_kw});
      lo.push_back((0.0 - der.p_init_kw) * kw_to_pu);
      hi.push_back((der.p_max_kw - der.p_init_kw) * kw_to_pu);
      columns.push_back(qcol);
      cp.vars.push_back({ControlVariable::Kind::der_q, static_cast<int>(d),
                         Phase::a, true, der.q_init_kvar});
      lo.push_back((der.q_min_kvar - der.q_init_kvar) * kw_to_pu);
      hi.push_back((der.q_max_kvar - der.q_init_kvar) * kw_to_pu);
    } else {
      int slot = 0;
      for (Phase p : kAllPhases) {
        if (!bus.phases.has(p)) continue;
        int pos = cols[static_cast<size_t>(slot++)];
        columns.push_back(sens.voltage.dmag_dP.col(pos));
        cp.vars.push_back({ControlVariable::Kind::der_p, static_cast<int>(d),
                           p, false, der.p_init_kw / np});
        lo.push_back((0.0 - der.p_init_kw / np) * kw_to_pu);
        hi.push_back((der.p_max_kw - der.p_init_kw) / np * kw_to_pu);
        columns.push_back(sens.voltage.dmag_dQ.col(pos));
        cp.vars.push_back({ControlVariable::Kind::der_q, static_cast<int>(d),
                           p, false, der.q_init_kvar / np});
        lo.push_back((der.q_min_kvar - der.q_init_kvar) / np * kw_to_pu);
        hi.push_back((der.q_max_kvar - der.q_init_kvar) / np * kw_to_pu);
      }
    }
  }

  if (net.tap) {
    const Bus& sb = net.bus_at(net.tap->slack_bus);
    int position = 0;
    bool first = true;
    for (Phase p : kAllPhases) {
      if (!sb.phases.has(p)) continue;
      int n = net.tap->position[static_cast<int>(p)];
      if (first) {
        position = n;
        first = false;
      } else if (n != position) {
        throw ValidationError(
            "control assumes a uniform initial tap position across phases");
      }
    }
    cp.tap_position = position;

    // one pseudo-continuous variable moves every phase of the tapped bus;
    // the slack's own magnitude response (rated * step per position) is
    // part of the physical column even though the sensitivity tables keep
    // slack rows at zero
    Eigen::VectorXd tcol = Eigen::VectorXd::Zero(m);
    for (int sp = 0; sp < index.n_slack(); ++sp) {
      int k = index.slack_indices()[sp];
      BusPhase bp = index.at(k);
      if (bp.bus != net.tap->slack_bus) continue;
      tcol += sens.tap.dmag_dtap.col(sp);
      double rated =
          std::abs(sb.slack_voltage[static_cast<int>(bp.phase)]);
      tcol[k] += rated * net.tap->step;
    }
    cp.tap_var = static_cast<int>(columns.size());
    columns.push_back(tcol);
    cp.vars.push_back({ControlVariable::Kind::tap, -1, Phase::a, true,
                       static_cast<double>(position)});
    lo.push_back(static_cast<double>(net.tap->n_min - position));
    hi.push_back(static_cast<double>(net.tap->n_max - position));
  }

  const int nvars = static_cast<int>(columns.size());
  cp.gain.resize(m, nvars);
  for (int c = 0; c < nvars; ++c) cp.gain.col(c) = columns[static_cast<size_t>(c)];
  cp.lower = Eigen::Map<Eigen::VectorXd>(lo.data(), nvars);
  cp.upper = Eigen::Map<Eigen::VectorXd>(hi.data(), nvars);
  return cp;
}

ControlSolution solve_control(const ControlProblem& problem) {
  const int nvars = static_cast<int>(problem.gain.cols());
  Eigen::VectorXd residual =
      Eigen::VectorXd::Constant(problem.initial_mag.size(),
                                problem.target_pu) -
      problem.initial_mag;

  ControlSolution sol;
  sol.objective_initial = residual.norm();

  if (nvars == 0) {
    sol.delta.resize(0);
    sol.predicted_mag = problem.initial_mag;
    sol.objective_prerounding = sol.objective_initial;
    sol.objective_predicted = sol.objective_initial;
    return sol;
  }

  BvlsResult fit =
      bvls(problem.gain, residual, problem.lower, problem.upper, 1e-9);
  sol.delta = fit.x;

  sol.objective_prerounding =
      (problem.gain * sol.delta - residual).norm();

  Eigen::VectorXd applied = sol.delta;
  if (problem.tap_var >= 0) {
    double dn = sol.delta[problem.tap_var];
    sol.tap_continuous = problem.tap_position + dn;
    double rounded = round_ties_toward_zero(dn);
    rounded = std::min(std::max(rounded, problem.lower[problem.tap_var]),
                       problem.upper[problem.tap_var]);
    sol.tap_rounded = problem.tap_position + static_cast<int>(rounded);
    applied[problem.tap_var] = rounded;
  }

  sol.predicted_mag = problem.initial_mag + problem.gain * applied;
  sol.objective_predicted =
      (sol.predicted_mag.array() - problem.target_pu).matrix().norm();

  for (size_t v = 0; v < problem.vars.size(); ++v) {
    const ControlVariable& var = problem.vars[v];
    if (var.kind == ControlVariable::Kind::tap) continue;
    const DerSpec& der = problem.ders[static_cast<size_t>(var.der)];
    double pu_to_kw = problem.power_base_va / 1e3;
    double delta_kw = sol.delta[static_cast<Eigen::Index>(v)] * pu_to_kw;

    DerSetpoint sp;
    sp.bus = der.bus;
    sp.phase = var.phase;
    sp.aggregated = var.aggregated;
    if (var.kind == ControlVariable::Kind::der_p) {
      sp.p_kw = var.initial_kw + delta_kw;
      sp.q_kvar = std::numeric_limits<double>::quiet_NaN();
    } else {
      sp.q_kvar = var.initial_kw + delta_kw;
      sp.p_kw = std::numeric_limits<double>::quiet_NaN();
    }
    sol.setpoints.push_back(sp);
  }
  return sol;
}

TrueProfile evaluate_step(const NetworkModel& net, const CompoundAdmittance& y,
                          const IndexMap& index, const OperatingPoint& base,
                          const ControlProblem& problem,
                          const Eigen::VectorXd& delta, bool round_tap) {
  if (delta.size() != problem.gain.cols())
    throw ArgumentError("step vector does not match the control model");

  Eigen::VectorXcd injections = base.injection;
  Eigen::VectorXcd slack = Eigen::VectorXcd::Zero(index.size());
  for (int s : index.slack_indices()) slack[s] = base.voltage[s];

  for (size_t v = 0; v < problem.vars.size(); ++v) {
    const ControlVariable& var = problem.vars[v];
    double step = delta[static_cast<Eigen::Index>(v)];
    if (step == 0.0) continue;
    if (var.kind == ControlVariable::Kind::tap) {
      if (!net.tap)
        throw ArgumentError(
            "control model has a tap variable but the network has no tap");
      double dn = round_tap ? round_ties_toward_zero(step) : step;
      const Bus& sb = net.bus_at(net.tap->slack_bus);
      for (Phase p : kAllPhases) {
        if (!sb.phases.has(p)) continue;
        int k = index.index_of({sb.id, p});
        Complex rated = sb.slack_voltage[static_cast<int>(p)];
        double pos = net.tap->position[static_cast<int>(p)] + dn;
        slack[k] = rated * (1.0 + pos * net.tap->step);
      }
      continue;
    }
    const DerSpec& der = problem.ders[static_cast<size_t>(var.der)];
    const Bus& bus = net.bus_at(der.bus);
    Complex dpq = var.kind == ControlVariable::Kind::der_p
                      ? Complex(step, 0.0)
                      : Complex(0.0, step);
    if (var.aggregated) {
      int np = bus.phases.count();
      for (Phase p : kAllPhases) {
        if (!bus.phases.has(p)) continue;
        int i = index.index_of({der.bus, p});
        injections[i] -= dpq / static_cast<double>(np);  // injection reduces absorption
      }
    } else {
      int i = index.index_of({der.bus, var.phase});
      injections[i] -= dpq;
    }
  }

  LoadflowOptions options;
  options.tolerance = 1e-12;
  options.max_iterations = 60;
  options.initial_voltages = base.voltage;
  options.injection_override = std::move(injections);
  options.slack_override = std::move(slack);

  TrueProfile profile;
  profile.op = solve_loadflow(net, y, index, options);
  profile.converged = profile.op.converged;
  profile.actual_mag = profile.op.voltage.cwiseAbs();
  profile.objective_actual =
      (profile.actual_mag.array() - problem.target_pu).matrix().norm();
  Eigen::VectorXd predicted = problem.initial_mag + problem.gain * delta;
  profile.prediction_error_inf =
      (profile.actual_mag - predicted).cwiseAbs().maxCoeff();
  return profile;
}

TrueProfile evaluate_true_profile(const NetworkModel& net,
                                  const CompoundAdmittance& y,
                                  const IndexMap& index,
                                  const OperatingPoint& base,
                                  const ControlProblem& problem,
                                  const ControlSolution& solution) {
  Eigen::VectorXd applied = solution.delta;
  if (problem.tap_var >= 0)
    applied[problem.tap_var] =
        static_cast<double>(solution.tap_rounded - problem.tap_position);
  TrueProfile profile =
      evaluate_step(net, y, index, base, problem, applied, false);
  profile.prediction_error_inf =
      (profile.actual_mag - solution.predicted_mag).cwiseAbs().maxCoeff();
  return profile;
}

}  // namespace gridsense
