/*
 * gridsense C API
 *
 * Multiphase distribution-network sensitivity engine: load flow, analytical
 * voltage/current/tap sensitivity coefficients, numeric and Jacobian
 * baselines, and a linearized voltage-control step.
 *
 * All functions returning gs_status set a thread-local message retrievable
 * with gs_last_error() on failure. Handles are opaque and owned by the
 * caller; free them with the matching *_free function. A handle may be read
 * from several threads concurrently once fully constructed.
 *
 * Conventions: powers are per-unit on the network base unless a name says
 * kw/kvar; feeder injections are absorption-positive; sensitivity
 * coefficients are derivatives with respect to *injected* power.
 */

#ifndef GRIDSENSE_H
#define GRIDSENSE_H

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define GS_API __declspec(dllexport)
#else
#define GS_API __attribute__((visibility("default")))
#endif

typedef enum gs_status {
  GS_OK = 0,
  GS_ERR_ARGUMENT = 1,
  GS_ERR_VALIDATION = 2,
  GS_ERR_NUMERICAL = 3,
  GS_ERR_IO = 4
} gs_status;

typedef enum gs_phase { GS_PHASE_A = 0, GS_PHASE_B = 1, GS_PHASE_C = 2 } gs_phase;

typedef struct gs_network gs_network;
typedef struct gs_solution gs_solution;
typedef struct gs_sensitivity gs_sensitivity;
typedef struct gs_validation gs_validation;
typedef struct gs_control gs_control;

GS_API const char* gs_version(void);
/* Message of the most recent failure on this thread; never NULL. */
GS_API const char* gs_last_error(void);
GS_API const char* gs_status_name(gs_status status);

/* ---------------------------------------------------------------- network */

/* Parses, validates and normalizes a feeder document. Rejects disconnected
 * networks; non-radial ones load, flagged by gs_network_is_radial. */
GS_API gs_status gs_network_load_file(const char* path, gs_network** out);
GS_API gs_status gs_network_parse_json(const char* text, gs_network** out);
GS_API void gs_network_free(gs_network* net);

GS_API int gs_network_bus_count(const gs_network* net);
GS_API int gs_network_index_count(const gs_network* net);  /* M */
GS_API int gs_network_pq_count(const gs_network* net);     /* N */
GS_API int gs_network_slack_count(const gs_network* net);
GS_API int gs_network_branch_count(const gs_network* net);
GS_API int gs_network_is_radial(const gs_network* net);
GS_API int gs_network_has_tap(const gs_network* net);
GS_API int gs_network_der_count(const gs_network* net);
GS_API double gs_network_base_power_va(const gs_network* net);
GS_API double gs_network_base_voltage_v(const gs_network* net);

GS_API gs_status gs_network_index_info(const gs_network* net, int index,
                                       int* bus, gs_phase* phase,
                                       int* is_slack);
GS_API gs_status gs_network_find_index(const gs_network* net, int bus,
                                       gs_phase phase, int* index);
/* Bus-phase index of the pq (resp. slack) column position. */
GS_API gs_status gs_network_pq_index(const gs_network* net, int pq_position,
                                     int* index);
GS_API gs_status gs_network_slack_index(const gs_network* net,
                                        int slack_position, int* index);
GS_API gs_status gs_network_branch_info(const gs_network* net, int branch,
                                        int* from_bus, int* to_bus,
                                        int* n_phases, gs_phase phases[3]);
GS_API gs_status gs_network_tap_info(const gs_network* net, int* slack_bus,
                                     int* n_min, int* n_max, double* step_pu,
                                     int position[3]);
GS_API gs_status gs_network_der_info(const gs_network* net, int der, int* bus,
                                     double* p_init_kw, double* p_max_kw,
                                     double* q_min_kvar, double* q_max_kvar,
                                     double* q_init_kvar);

/* Compound admittance entries in (row, col) order. */
GS_API gs_status gs_network_admittance_nnz(const gs_network* net, int* count);
GS_API gs_status gs_network_admittance_entry(const gs_network* net, int k,
                                             int* row, int* col, double* re,
                                             double* im);

/* -------------------------------------------------------------- load flow */

/* Newton-Raphson from a flat start. Pass tolerance <= 0 or
 * max_iterations <= 0 for the defaults (1e-10 pu, 50). Non-convergence is
 * NOT an error; check gs_solution_converged. */
GS_API gs_status gs_solve_loadflow(const gs_network* net, double tolerance,
                                   int max_iterations, gs_solution** out);
GS_API void gs_solution_free(gs_solution* sol);
GS_API int gs_solution_converged(const gs_solution* sol);
GS_API int gs_solution_iterations(const gs_solution* sol);
GS_API double gs_solution_max_mismatch(const gs_solution* sol);
GS_API gs_status gs_solution_voltage(const gs_solution* sol, int index,
                                     double* re, double* im);
/* Branch current in from->to orientation for one carried phase slot. */
GS_API gs_status gs_solution_branch_current(const gs_solution* sol, int branch,
                                            int phase_slot, double* re,
                                            double* im);

/* ----------------------------------------------------------- sensitivity */

/* One factorization, 2N+S back-solves. threads <= 1 runs sequentially. */
GS_API gs_status gs_sensitivity_compute(const gs_network* net,
                                        const gs_solution* sol, int threads,
                                        gs_sensitivity** out);
GS_API void gs_sensitivity_free(gs_sensitivity* sens);
GS_API unsigned long long gs_sensitivity_factorizations(
    const gs_sensitivity* sens);

/* d|E_i| / dP_l and /dQ_l. i_index over 0..M-1, l_pq over 0..N-1. */
GS_API gs_status gs_sensitivity_voltage(const gs_sensitivity* sens,
                                        int i_index, int l_pq,
                                        double* dmag_dp, double* dmag_dq);
/* Complex dE_i/dP_l, dE_i/dQ_l. */
GS_API gs_status gs_sensitivity_voltage_complex(const gs_sensitivity* sens,
                                                int i_index, int l_pq,
                                                double* dp_re, double* dp_im,
                                                double* dq_re, double* dq_im);
/* d|I_ij| coefficients; valid=0 flags magnitudes below the current floor. */
GS_API gs_status gs_sensitivity_current(const gs_sensitivity* sens, int branch,
                                        int phase_slot, int l_pq,
                                        double* dmag_dp, double* dmag_dq,
                                        int* valid);
/* d|E_i| / d|E_k| and per tap position; has_tap=0 when the slack carries
 * no tap changer (dmag_dtap is 0 there). */
GS_API gs_status gs_sensitivity_tap(const gs_sensitivity* sens, int i_index,
                                    int k_slack, double* dmag_dslack,
                                    double* dmag_dtap, int* has_tap);

/* ----------------------------------------------------------- validation */

/* Analytical coefficients vs central-difference oracle (and vs the
 * Jacobian inversion for voltage rows). delta <= 0 uses 1e-5 pu. */
GS_API gs_status gs_validate(const gs_network* net, const gs_solution* sol,
                             double delta, gs_validation** out);
GS_API void gs_validation_free(gs_validation* val);
GS_API int gs_validation_row_count(const gs_validation* val);

typedef enum gs_validation_kind {
  GS_VAL_VOLTAGE_P = 0,
  GS_VAL_VOLTAGE_Q = 1,
  GS_VAL_CURRENT_P = 2,
  GS_VAL_CURRENT_Q = 3,
  GS_VAL_TAP = 4
} gs_validation_kind;

/* jacobian and err_jacobian are NaN where the method does not apply
 * (currents, taps). j_bus is the to-bus for current rows, else -1. */
GS_API gs_status gs_validation_row(const gs_validation* val, int row,
                                   gs_validation_kind* kind, int* i_bus,
                                   gs_phase* i_phase, int* j_bus, int* l_bus,
                                   gs_phase* l_phase, double* analytical,
                                   double* oracle, double* jacobian,
                                   double* err_oracle, double* err_jacobian);

/* ------------------------------------------------------------- benchmark */

typedef struct gs_benchmark_result {
  int repetitions;
  int n_pq;
  int m;
  double jacobian_mean_ms;
  double jacobian_ci_ms; /* 95% half-width */
  double analytical_mean_ms;
  double analytical_ci_ms;
  double ratio; /* jacobian mean / analytical mean */
} gs_benchmark_result;

/* Times Jacobian build+inversion+extraction against analytical
 * build+factorize+2N solves on identical state, single-threaded,
 * repetitions >= 30. */
GS_API gs_status gs_benchmark(const gs_network* net, const gs_solution* sol,
                              int repetitions, gs_benchmark_result* out);

/* --------------------------------------------------------------- control */

/* Linearized voltage-control step using the feeder's ders[] entries.
 * per_phase=0 controls 3-phase totals, 1 each phase independently. The
 * solved set points are applied and verified with a full load flow. */
GS_API gs_status gs_control_solve(const gs_network* net,
                                  const gs_solution* sol, int per_phase,
                                  double target_pu, gs_control** out);
GS_API void gs_control_free(gs_control* ctl);

GS_API int gs_control_var_count(const gs_control* ctl);

typedef enum gs_control_kind {
  GS_CTRL_DER_P = 0,
  GS_CTRL_DER_Q = 1,
  GS_CTRL_TAP = 2
} gs_control_kind;

/* Values in kW/kvar for DER variables, tap steps for the tap variable.
 * aggregated=1 means the variable is a 3-phase total. */
GS_API gs_status gs_control_var(const gs_control* ctl, int var,
                                gs_control_kind* kind, int* bus,
                                gs_phase* phase, int* aggregated,
                                double* initial, double* delta, double* final_,
                                double* lower, double* upper);
/* initial/continuous/rounded absolute tap positions; fails without a tap. */
GS_API gs_status gs_control_tap(const gs_control* ctl, int* initial,
                                double* continuous, int* rounded);
GS_API gs_status gs_control_objectives(const gs_control* ctl, double* initial,
                                       double* prerounding, double* predicted,
                                       double* actual);
GS_API gs_status gs_control_profile(const gs_control* ctl, int index,
                                    double* mag_initial, double* mag_predicted,
                                    double* mag_actual);
GS_API int gs_control_converged(const gs_control* ctl);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* GRIDSENSE_H */
