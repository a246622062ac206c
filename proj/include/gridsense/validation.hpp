#pragma once

#include <vector>

#include "gridsense/baselines.hpp"
#include "gridsense/sensitivity.hpp"

namespace gridsense {

/// One analytical coefficient next to its numeric baselines. Error
/// measures switch from relative to absolute below the floor of the
/// corresponding comparison (near-zero coefficients have no meaningful
/// relative error).
struct ValidationRow {
  enum class Kind { voltage_p, voltage_q, current_p, current_q, tap };
  Kind kind = Kind::voltage_p;
  BusPhase i;        // monitored bus-phase (from-bus side for currents)
  int j_bus = -1;    // to-bus for current rows, -1 otherwise
  BusPhase l;        // perturbed bus-phase (slack phase for tap rows)
  double analytical = 0.0;
  double oracle = 0.0;
  double jacobian = 0.0;      // NaN where the method does not apply
  double err_oracle = 0.0;    // relative above the floor, absolute below
  double err_jacobian = 0.0;  // NaN where the method does not apply
};

struct ValidationOptions {
  double delta = 1e-5;              // oracle perturbation, per-unit
  double rel_floor_oracle = 1e-4;   // below this |oracle|, compare absolutely
  double rel_floor_jacobian = 1e-8;
  double current_floor = 1e-6;      // skip current rows with |I| below
};

/// Runs the full validation protocol at one operating point: analytical
/// voltage/current/tap coefficients against the perturbation oracle, and
/// voltage coefficients additionally against the Jacobian inversion.
std::vector<ValidationRow> validate_sensitivities(
    const NetworkModel& net, const CompoundAdmittance& y, const IndexMap& index,
    const OperatingPoint& op, const ValidationOptions& options = {});

}  // namespace gridsense
