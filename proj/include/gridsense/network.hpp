#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <vector>

#include "gridsense/types.hpp"

namespace gridsense {

enum class BusKind { slack, pq };

struct Bus {
  int id = 0;
  BusKind kind = BusKind::pq;
  PhaseMask phases;
  /// Constant-PQ injection per phase, absorption positive. Valid only at
  /// indices whose phase is present; per-unit after to_per_unit().
  std::array<Complex, 3> injection{};
  /// Rated phasor per phase, per-unit, before tap adjustment (slack buses).
  std::array<Complex, 3> slack_voltage{};
};

/// Two-terminal pi-model line section. Matrices are p x p over the carried
/// phases in slot order; shunt_admittance is the total line charging, half
/// of which lands on each end.
struct Branch {
  int from = 0;
  int to = 0;
  PhaseMask phases;
  Eigen::MatrixXcd series_impedance;
  Eigen::MatrixXcd shunt_admittance;
};

/// On-load tap changer at a slack bus: effective magnitude is
/// rated * (1 + position * step), per phase.
struct TapChanger {
  int slack_bus = 0;
  int n_min = 0;
  int n_max = 0;
  double step = 0.0;
  std::array<int, 3> position{0, 0, 0};
};

struct NetworkModel {
  double base_power_va = 1.0;
  double base_voltage_v = 1.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::optional<TapChanger> tap;

  const Bus* find_bus(int id) const;
  const Bus& bus_at(int id) const;  // throws ArgumentError if absent

  /// Tap-adjusted slack phasor for one phase of a slack bus.
  Complex slack_phasor(const Bus& bus, Phase p) const;
};

struct RadialReport {
  bool radial = false;
  bool connected = false;
  int slack_count = 0;
  std::vector<int> unreachable;  // bus ids not reachable from the first slack
};

/// Tree test on the bus-pair graph; reachability is taken from the first
/// slack bus. Invariant under branch order.
RadialReport validate_radial(const NetworkModel& net);

/// Structural checks performed at ingestion: unique bus ids, phase
/// consistency of branches and injections, slack voltage presence,
/// connectivity. Throws ValidationError describing the first offense.
void validate_structure(const NetworkModel& net);

/// Bijection between existing bus-phase pairs and 0..M-1, ordered by
/// ascending bus id then phase a<b<c, partitioned into slack and pq sets.
class IndexMap {
 public:
  explicit IndexMap(const NetworkModel& net);

  int size() const { return static_cast<int>(entries_.size()); }
  BusPhase at(int idx) const;
  int index_of(BusPhase bp) const;  // throws ArgumentError if absent
  std::optional<int> try_index(BusPhase bp) const;

  bool is_slack(int idx) const { return pq_position_[idx] < 0; }
  const std::vector<int>& slack_indices() const { return slack_; }
  const std::vector<int>& pq_indices() const { return pq_; }

  /// Position of a pq index within pq_indices(), -1 for slack indices.
  int pq_position(int idx) const { return pq_position_[idx]; }
  /// Position of a slack index within slack_indices(), -1 for pq indices.
  int slack_position(int idx) const { return slack_position_[idx]; }

  int n_pq() const { return static_cast<int>(pq_.size()); }
  int n_slack() const { return static_cast<int>(slack_.size()); }

 private:
  std::vector<BusPhase> entries_;
  std::map<BusPhase, int> lookup_;
  std::vector<int> slack_;
  std::vector<int> pq_;
  std::vector<int> pq_position_;
  std::vector<int> slack_position_;
};

/// Normalizes a physical-unit model (impedances in ohm, shunts in siemens,
/// powers in VA) by Z_base = V^2/S and S_base. Slack voltages are already
/// per-unit in the feeder schema and pass through unchanged.
NetworkModel to_per_unit(const NetworkModel& raw);

/// Inverse of to_per_unit.
NetworkModel from_per_unit(const NetworkModel& pu);

}  // namespace gridsense
