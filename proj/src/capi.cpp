#include "gridsense.h"

#include <cstring>
#include <string>

#include "gridsense/baselines.hpp"
#include "gridsense/control.hpp"
#include "gridsense/feeder_json.hpp"
#include "gridsense/sensitivity.hpp"
#include "gridsense/validation.hpp"

using namespace gridsense;

namespace {

thread_local std::string g_last_error;

gs_status set_error(ErrorKind kind, const std::string& msg) {
  g_last_error = msg;
  switch (kind) {
    case ErrorKind::argument: return GS_ERR_ARGUMENT;
    case ErrorKind::validation: return GS_ERR_VALIDATION;
    case ErrorKind::numerical: return GS_ERR_NUMERICAL;
    case ErrorKind::io: return GS_ERR_IO;
  }
  return GS_ERR_NUMERICAL;
}

template <typename Fn>
gs_status guarded(Fn&& fn) {
  try {
    fn();
    return GS_OK;
  } catch (const Error& e) {
    return set_error(e.kind(), e.what());
  } catch (const std::exception& e) {
    return set_error(ErrorKind::numerical, e.what());
  } catch (...) {
    return set_error(ErrorKind::numerical, "unknown failure");
  }
}

gs_status arg_error(const std::string& msg) {
  return set_error(ErrorKind::argument, msg);
}

}  // namespace

struct gs_network {
  NetworkModel net;
  IndexMap index;
  CompoundAdmittance y;
  RadialReport radial;
  std::vector<DerSpec> ders;
  std::vector<AdmittanceEntry> entries;

  explicit gs_network(FeederFile file)
      : net(std::move(file.network)),
        index(net),
        y(build_compound_admittance(net, index)),
        radial(file.radial),
        ders(std::move(file.ders)),
        entries(sorted_entries(y)) {}
};

struct gs_solution {
  OperatingPoint op;
  std::vector<Eigen::VectorXcd> currents;
};

struct gs_sensitivity {
  SensitivitySet set;
};

struct gs_validation {
  std::vector<ValidationRow> rows;
};

struct gs_control {
  ControlProblem problem;
  ControlSolution solution;
  TrueProfile profile;
};

extern "C" {

const char* gs_version(void) { return "gridsense 1.0.0"; }

const char* gs_last_error(void) { return g_last_error.c_str(); }

const char* gs_status_name(gs_status status) {
  switch (status) {
    case GS_OK: return "ok";
    case GS_ERR_ARGUMENT: return "argument error";
    case GS_ERR_VALIDATION: return "validation error";
    case GS_ERR_NUMERICAL: return "numerical error";
    case GS_ERR_IO: return "io error";
  }
  return "unknown";
}

/* ---------------------------------------------------------------- network */

gs_status gs_network_load_file(const char* path, gs_network** out) {
  if (!path || !out) return arg_error("null argument");
  return guarded([&] { *out = new gs_network(load_feeder(path)); });
}

gs_status gs_network_parse_json(const char* text, gs_network** out) {
  if (!text || !out) return arg_error("null argument");
  return guarded([&] { *out = new gs_network(parse_feeder(text)); });
}

void gs_network_free(gs_network* net) { delete net; }

int gs_network_bus_count(const gs_network* net) {
  return net ? static_cast<int>(net->net.buses.size()) : 0;
}
int gs_network_index_count(const gs_network* net) {
  return net ? net->index.size() : 0;
}
int gs_network_pq_count(const gs_network* net) {
  return net ? net->index.n_pq() : 0;
}
int gs_network_slack_count(const gs_network* net) {
  return net ? net->index.n_slack() : 0;
}
int gs_network_branch_count(const gs_network* net) {
  return net ? static_cast<int>(net->net.branches.size()) : 0;
}
int gs_network_is_radial(const gs_network* net) {
  return net && net->radial.radial ? 1 : 0;
}
int gs_network_has_tap(const gs_network* net) {
  return net && net->net.tap ? 1 : 0;
}
int gs_network_der_count(const gs_network* net) {
  return net ? static_cast<int>(net->ders.size()) : 0;
}
double gs_network_base_power_va(const gs_network* net) {
  return net ? net->net.base_power_va : 0.0;
}
double gs_network_base_voltage_v(const gs_network* net) {
  return net ? net->net.base_voltage_v : 0.0;
}

gs_status gs_network_index_info(const gs_network* net, int index, int* bus,
                                gs_phase* phase, int* is_slack) {
  if (!net) return arg_error("null network");
  return guarded([&] {
    BusPhase bp = net->index.at(index);
    if (bus) *bus = bp.bus;
    if (phase) *phase = static_cast<gs_phase>(bp.phase);
    if (is_slack) *is_slack = net->index.is_slack(index) ? 1 : 0;
  });
}

gs_status gs_network_find_index(const gs_network* net, int bus, gs_phase phase,
                                int* index) {
  if (!net || !index) return arg_error("null argument");
  return guarded([&] {
    *index = net->index.index_of({bus, static_cast<Phase>(phase)});
  });
}

gs_status gs_network_pq_index(const gs_network* net, int pq_position,
                              int* index) {
  if (!net || !index) return arg_error("null argument");
  if (pq_position < 0 || pq_position >= net->index.n_pq())
    return arg_error("pq position out of range");
  *index = net->index.pq_indices()[pq_position];
  return GS_OK;
}

gs_status gs_network_slack_index(const gs_network* net, int slack_position,
                                 int* index) {
  if (!net || !index) return arg_error("null argument");
  if (slack_position < 0 || slack_position >= net->index.n_slack())
    return arg_error("slack position out of range");
  *index = net->index.slack_indices()[slack_position];
  return GS_OK;
}

gs_status gs_network_branch_info(const gs_network* net, int branch,
                                 int* from_bus, int* to_bus, int* n_phases,
                                 gs_phase phases[3]) {
  if (!net) return arg_error("null network");
  if (branch < 0 || branch >= static_cast<int>(net->net.branches.size()))
    return arg_error("branch index out of range");
  const Branch& br = net->net.branches[static_cast<size_t>(branch)];
  if (from_bus) *from_bus = br.from;
  if (to_bus) *to_bus = br.to;
  if (n_phases) *n_phases = br.phases.count();
  if (phases) {
    int s = 0;
    for (Phase p : kAllPhases)
      if (br.phases.has(p)) phases[s++] = static_cast<gs_phase>(p);
  }
  return GS_OK;
}

gs_status gs_network_tap_info(const gs_network* net, int* slack_bus,
                              int* n_min, int* n_max, double* step_pu,
                              int position[3]) {
  if (!net) return arg_error("null network");
  if (!net->net.tap) return arg_error("network has no tap changer");
  const TapChanger& tap = *net->net.tap;
  if (slack_bus) *slack_bus = tap.slack_bus;
  if (n_min) *n_min = tap.n_min;
  if (n_max) *n_max = tap.n_max;
  if (step_pu) *step_pu = tap.step;
  if (position)
    for (int i = 0; i < 3; ++i) position[i] = tap.position[static_cast<size_t>(i)];
  return GS_OK;
}

gs_status gs_network_der_info(const gs_network* net, int der, int* bus,
                              double* p_init_kw, double* p_max_kw,
                              double* q_min_kvar, double* q_max_kvar,
                              double* q_init_kvar) {
  if (!net) return arg_error("null network");
  if (der < 0 || der >= static_cast<int>(net->ders.size()))
    return arg_error("der index out of range");
  const DerSpec& d = net->ders[static_cast<size_t>(der)];
  if (bus) *bus = d.bus;
  if (p_init_kw) *p_init_kw = d.p_init_kw;
  if (p_max_kw) *p_max_kw = d.p_max_kw;
  if (q_min_kvar) *q_min_kvar = d.q_min_kvar;
  if (q_max_kvar) *q_max_kvar = d.q_max_kvar;
  if (q_init_kvar) *q_init_kvar = d.q_init_kvar;
  return GS_OK;
}

gs_status gs_network_admittance_nnz(const gs_network* net, int* count) {
  if (!net || !count) return arg_error("null argument");
  *count = static_cast<int>(net->entries.size());
  return GS_OK;
}

gs_status gs_network_admittance_entry(const gs_network* net, int k, int* row,
                                      int* col, double* re, double* im) {
  if (!net) return arg_error("null network");
  if (k < 0 || k >= static_cast<int>(net->entries.size()))
    return arg_error("entry index out of range");
  const AdmittanceEntry& e = net->entries[static_cast<size_t>(k)];
  if (row) *row = e.row;
  if (col) *col = e.col;
  if (re) *re = e.value.real();
  if (im) *im = e.value.imag();
  return GS_OK;
}

/* -------------------------------------------------------------- load flow */

gs_status gs_solve_loadflow(const gs_network* net, double tolerance,
                            int max_iterations, gs_solution** out) {
  if (!net || !out) return arg_error("null argument");
  return guarded([&] {
    LoadflowOptions options;
    if (tolerance > 0) options.tolerance = tolerance;
    if (max_iterations > 0) options.max_iterations = max_iterations;
    auto sol = new gs_solution;
    sol->op = solve_loadflow(net->net, net->y, net->index, options);
    sol->currents = branch_currents(sol->op, net->y);
    *out = sol;
  });
}

void gs_solution_free(gs_solution* sol) { delete sol; }

int gs_solution_converged(const gs_solution* sol) {
  return sol && sol->op.converged ? 1 : 0;
}
int gs_solution_iterations(const gs_solution* sol) {
  return sol ? sol->op.iterations : 0;
}
double gs_solution_max_mismatch(const gs_solution* sol) {
  return sol ? sol->op.max_mismatch : 0.0;
}

gs_status gs_solution_voltage(const gs_solution* sol, int index, double* re,
                              double* im) {
  if (!sol) return arg_error("null solution");
  if (index < 0 || index >= sol->op.voltage.size())
    return arg_error("index out of range");
  if (re) *re = sol->op.voltage[index].real();
  if (im) *im = sol->op.voltage[index].imag();
  return GS_OK;
}

gs_status gs_solution_branch_current(const gs_solution* sol, int branch,
                                     int phase_slot, double* re, double* im) {
  if (!sol) return arg_error("null solution");
  if (branch < 0 || branch >= static_cast<int>(sol->currents.size()))
    return arg_error("branch index out of range");
  const Eigen::VectorXcd& c = sol->currents[static_cast<size_t>(branch)];
  if (phase_slot < 0 || phase_slot >= c.size())
    return arg_error("phase slot out of range");
  if (re) *re = c[phase_slot].real();
  if (im) *im = c[phase_slot].imag();
  return GS_OK;
}

/* ------------------------------------------------------------ sensitivity */

gs_status gs_sensitivity_compute(const gs_network* net, const gs_solution* sol,
                                 int threads, gs_sensitivity** out) {
  if (!net || !sol || !out) return arg_error("null argument");
  return guarded([&] {
    auto sens = new gs_sensitivity;
    sens->set = full_sensitivity(sol->op, net->y, net->net, net->index,
                                 threads < 1 ? 1 : threads);
    *out = sens;
  });
}

void gs_sensitivity_free(gs_sensitivity* sens) { delete sens; }

unsigned long long gs_sensitivity_factorizations(const gs_sensitivity* sens) {
  return sens ? sens->set.factorizations : 0;
}

gs_status gs_sensitivity_voltage(const gs_sensitivity* sens, int i_index,
                                 int l_pq, double* dmag_dp, double* dmag_dq) {
  if (!sens) return arg_error("null sensitivity");
  const auto& v = sens->set.voltage;
  if (i_index < 0 || i_index >= v.dmag_dP.rows())
    return arg_error("bus-phase index out of range");
  if (l_pq < 0 || l_pq >= v.dmag_dP.cols())
    return arg_error("pq position out of range");
  if (dmag_dp) *dmag_dp = v.dmag_dP(i_index, l_pq);
  if (dmag_dq) *dmag_dq = v.dmag_dQ(i_index, l_pq);
  return GS_OK;
}

gs_status gs_sensitivity_voltage_complex(const gs_sensitivity* sens,
                                         int i_index, int l_pq, double* dp_re,
                                         double* dp_im, double* dq_re,
                                         double* dq_im) {
  if (!sens) return arg_error("null sensitivity");
  const auto& v = sens->set.voltage;
  if (i_index < 0 || i_index >= v.dE_dP.rows())
    return arg_error("bus-phase index out of range");
  if (l_pq < 0 || l_pq >= v.dE_dP.cols())
    return arg_error("pq position out of range");
  if (dp_re) *dp_re = v.dE_dP(i_index, l_pq).real();
  if (dp_im) *dp_im = v.dE_dP(i_index, l_pq).imag();
  if (dq_re) *dq_re = v.dE_dQ(i_index, l_pq).real();
  if (dq_im) *dq_im = v.dE_dQ(i_index, l_pq).imag();
  return GS_OK;
}

gs_status gs_sensitivity_current(const gs_sensitivity* sens, int branch,
                                 int phase_slot, int l_pq, double* dmag_dp,
                                 double* dmag_dq, int* valid) {
  if (!sens) return arg_error("null sensitivity");
  const auto& c = sens->set.current;
  if (branch < 0 || branch >= static_cast<int>(c.dmag_dP.size()))
    return arg_error("branch index out of range");
  const auto& mp = c.dmag_dP[static_cast<size_t>(branch)];
  if (phase_slot < 0 || phase_slot >= mp.rows())
    return arg_error("phase slot out of range");
  if (l_pq < 0 || l_pq >= mp.cols()) return arg_error("pq position out of range");
  if (dmag_dp) *dmag_dp = mp(phase_slot, l_pq);
  if (dmag_dq) *dmag_dq = c.dmag_dQ[static_cast<size_t>(branch)](phase_slot, l_pq);
  if (valid)
    *valid = c.valid[static_cast<size_t>(branch)](phase_slot, l_pq) ? 1 : 0;
  return GS_OK;
}

gs_status gs_sensitivity_tap(const gs_sensitivity* sens, int i_index,
                             int k_slack, double* dmag_dslack,
                             double* dmag_dtap, int* has_tap) {
  if (!sens) return arg_error("null sensitivity");
  const auto& t = sens->set.tap;
  if (i_index < 0 || i_index >= t.dmag_dslack.rows())
    return arg_error("bus-phase index out of range");
  if (k_slack < 0 || k_slack >= t.dmag_dslack.cols())
    return arg_error("slack position out of range");
  if (dmag_dslack) *dmag_dslack = t.dmag_dslack(i_index, k_slack);
  if (dmag_dtap) *dmag_dtap = t.dmag_dtap(i_index, k_slack);
  if (has_tap) *has_tap = t.has_tap[static_cast<size_t>(k_slack)] ? 1 : 0;
  return GS_OK;
}

/* ------------------------------------------------------------ validation */

gs_status gs_validate(const gs_network* net, const gs_solution* sol,
                      double delta, gs_validation** out) {
  if (!net || !sol || !out) return arg_error("null argument");
  return guarded([&] {
    ValidationOptions options;
    if (delta > 0) options.delta = delta;
    auto val = new gs_validation;
    val->rows =
        validate_sensitivities(net->net, net->y, net->index, sol->op, options);
    *out = val;
  });
}

void gs_validation_free(gs_validation* val) { delete val; }

int gs_validation_row_count(const gs_validation* val) {
  return val ? static_cast<int>(val->rows.size()) : 0;
}

gs_status gs_validation_row(const gs_validation* val, int row,
                            gs_validation_kind* kind, int* i_bus,
                            gs_phase* i_phase, int* j_bus, int* l_bus,
                            gs_phase* l_phase, double* analytical,
                            double* oracle, double* jacobian,
                            double* err_oracle, double* err_jacobian) {
  if (!val) return arg_error("null validation");
  if (row < 0 || row >= static_cast<int>(val->rows.size()))
    return arg_error("row out of range");
  const ValidationRow& r = val->rows[static_cast<size_t>(row)];
  if (kind) *kind = static_cast<gs_validation_kind>(r.kind);
  if (i_bus) *i_bus = r.i.bus;
  if (i_phase) *i_phase = static_cast<gs_phase>(r.i.phase);
  if (j_bus) *j_bus = r.j_bus;
  if (l_bus) *l_bus = r.l.bus;
  if (l_phase) *l_phase = static_cast<gs_phase>(r.l.phase);
  if (analytical) *analytical = r.analytical;
  if (oracle) *oracle = r.oracle;
  if (jacobian) *jacobian = r.jacobian;
  if (err_oracle) *err_oracle = r.err_oracle;
  if (err_jacobian) *err_jacobian = r.err_jacobian;
  return GS_OK;
}

/* -------------------------------------------------------------- benchmark */

gs_status gs_benchmark(const gs_network* net, const gs_solution* sol,
                       int repetitions, gs_benchmark_result* out) {
  if (!net || !sol || !out) return arg_error("null argument");
  return guarded([&] {
    BenchmarkReport report =
        benchmark(net->y, net->index, sol->op, repetitions);
    out->repetitions = report.repetitions;
    out->n_pq = report.n_pq;
    out->m = report.m;
    out->jacobian_mean_ms = report.jacobian_mean_ms;
    out->jacobian_ci_ms = report.jacobian_ci_ms;
    out->analytical_mean_ms = report.analytical_mean_ms;
    out->analytical_ci_ms = report.analytical_ci_ms;
    out->ratio = report.ratio;
  });
}

/* ---------------------------------------------------------------- control */

gs_status gs_control_solve(const gs_network* net, const gs_solution* sol,
                           int per_phase, double target_pu, gs_control** out) {
  if (!net || !sol || !out) return arg_error("null argument");
  return guarded([&] {
    if (net->ders.empty())
      throw ValidationError("feeder declares no ders[] to control");
    SensitivitySet sens =
        full_sensitivity(sol->op, net->y, net->net, net->index);
    auto ctl = new gs_control;
    try {
      ctl->problem = build_linear_model(
          sens, net->net, net->index, sol->op, net->ders,
          per_phase ? ControlMode::per_phase : ControlMode::balanced_3phase,
          target_pu > 0 ? target_pu : 1.0);
      ctl->solution = solve_control(ctl->problem);
      ctl->profile = evaluate_true_profile(net->net, net->y, net->index,
                                           sol->op, ctl->problem,
                                           ctl->solution);
    } catch (...) {
      delete ctl;
      throw;
    }
    *out = ctl;
  });
}

void gs_control_free(gs_control* ctl) { delete ctl; }

int gs_control_var_count(const gs_control* ctl) {
  return ctl ? static_cast<int>(ctl->problem.vars.size()) : 0;
}

gs_status gs_control_var(const gs_control* ctl, int var, gs_control_kind* kind,
                         int* bus, gs_phase* phase, int* aggregated,
                         double* initial, double* delta, double* final_,
                         double* lower, double* upper) {
  if (!ctl) return arg_error("null control");
  if (var < 0 || var >= static_cast<int>(ctl->problem.vars.size()))
    return arg_error("variable index out of range");
  const ControlVariable& v = ctl->problem.vars[static_cast<size_t>(var)];
  const double pu_to_kw = ctl->problem.power_base_va / 1e3;
  bool tap = v.kind == ControlVariable::Kind::tap;
  double scale = tap ? 1.0 : pu_to_kw;
  if (kind) *kind = static_cast<gs_control_kind>(v.kind);
  if (bus)
    *bus = tap ? -1 : ctl->problem.ders[static_cast<size_t>(v.der)].bus;
  if (phase) *phase = static_cast<gs_phase>(v.phase);
  if (aggregated) *aggregated = v.aggregated ? 1 : 0;
  if (initial) *initial = v.initial_kw;
  if (delta) *delta = ctl->solution.delta[var] * scale;
  if (final_) *final_ = v.initial_kw + ctl->solution.delta[var] * scale;
  if (lower) *lower = v.initial_kw + ctl->problem.lower[var] * scale;
  if (upper) *upper = v.initial_kw + ctl->problem.upper[var] * scale;
  return GS_OK;
}

gs_status gs_control_tap(const gs_control* ctl, int* initial,
                         double* continuous, int* rounded) {
  if (!ctl) return arg_error("null control");
  if (ctl->problem.tap_var < 0)
    return arg_error("control problem has no tap variable");
  if (initial) *initial = ctl->problem.tap_position;
  if (continuous) *continuous = ctl->solution.tap_continuous;
  if (rounded) *rounded = ctl->solution.tap_rounded;
  return GS_OK;
}

gs_status gs_control_objectives(const gs_control* ctl, double* initial,
                                double* prerounding, double* predicted,
                                double* actual) {
  if (!ctl) return arg_error("null control");
  if (initial) *initial = ctl->solution.objective_initial;
  if (prerounding) *prerounding = ctl->solution.objective_prerounding;
  if (predicted) *predicted = ctl->solution.objective_predicted;
  if (actual) *actual = ctl->profile.objective_actual;
  return GS_OK;
}

gs_status gs_control_profile(const gs_control* ctl, int index,
                             double* mag_initial, double* mag_predicted,
                             double* mag_actual) {
  if (!ctl) return arg_error("null control");
  if (index < 0 || index >= ctl->problem.initial_mag.size())
    return arg_error("index out of range");
  if (mag_initial) *mag_initial = ctl->problem.initial_mag[index];
  if (mag_predicted) *mag_predicted = ctl->solution.predicted_mag[index];
  if (mag_actual) *mag_actual = ctl->profile.actual_mag[index];
  return GS_OK;
}

int gs_control_converged(const gs_control* ctl) {
  return ctl && ctl->profile.converged ? 1 : 0;
}

} /* extern "C" */
