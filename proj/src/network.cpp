#include "gridsense/network.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <sstream>

namespace gridsense {

const Bus* NetworkModel::find_bus(int id) const {
  for (const Bus& b : buses)
    if (b.id == id) return &b;
  return nullptr;
}

const Bus& NetworkModel::bus_at(int id) const {
  const Bus* b = find_bus(id);
  if (!b) throw ArgumentError("no bus with id " + std::to_string(id));
  return *b;
}

Complex NetworkModel::slack_phasor(const Bus& bus, Phase p) const {
  Complex rated = bus.slack_voltage[static_cast<int>(p)];
  if (tap && tap->slack_bus == bus.id) {
    int n = tap->position[static_cast<int>(p)];
    rated *= 1.0 + n * tap->step;
  }
  return rated;
}

RadialReport validate_radial(const NetworkModel& net) {
  RadialReport report;
  for (const Bus& b : net.buses)
    if (b.kind == BusKind::slack) ++report.slack_count;

  // adjacency over bus ids; parallel branches count as distinct edges
  std::map<int, std::vector<int>> adj;
  for (const Bus& b : net.buses) adj[b.id];
  for (const Branch& br : net.branches) {
    adj[br.from].push_back(br.to);
    adj[br.to].push_back(br.from);
  }

  int root = 0;
  bool have_root = false;
  for (const Bus& b : net.buses) {
    if (b.kind == BusKind::slack) {
      root = b.id;
      have_root = true;
      break;
    }
  }
  if (!have_root && !net.buses.empty()) root = net.buses.front().id;

  std::set<int> seen;
  if (!net.buses.empty()) {
    std::queue<int> frontier;
    frontier.push(root);
    seen.insert(root);
    while (!frontier.empty()) {
      int u = frontier.front();
      frontier.pop();
      for (int v : adj[u]) {
        if (seen.insert(v).second) frontier.push(v);
      }
    }
  }
  for (const Bus& b : net.buses)
    if (!seen.count(b.id)) report.unreachable.push_back(b.id);
  std::sort(report.unreachable.begin(), report.unreachable.end());

  report.connected = report.unreachable.empty();
  report.radial = report.connected &&
                  net.branches.size() + 1 == net.buses.size();
  return report;
}

void validate_structure(const NetworkModel& net) {
  if (net.buses.empty()) throw ValidationError("network has no buses");

  std::set<int> ids;
  for (const Bus& b : net.buses) {
    if (!ids.insert(b.id).second)
      throw ValidationError("duplicate bus id " + std::to_string(b.id));
    if (b.phases.empty())
      throw ValidationError("bus " + std::to_string(b.id) +
                            " declares no phases");
    if (b.kind == BusKind::slack) {
      for (Phase p : kAllPhases) {
        if (b.phases.has(p) &&
            b.slack_voltage[static_cast<int>(p)] == Complex(0.0, 0.0))
          throw ValidationError("slack bus " + std::to_string(b.id) +
                                " is missing a voltage for phase " +
                                std::string(1, phase_char(p)));
      }
    }
  }

  bool any_slack = false;
  for (const Bus& b : net.buses) any_slack |= b.kind == BusKind::slack;
  if (!any_slack) throw ValidationError("network has no slack bus");

  int bi = 0;
  for (const Branch& br : net.branches) {
    std::string name = "branch " + std::to_string(br.from) + "-" +
                       std::to_string(br.to);
    if (br.from == br.to) throw ValidationError(name + " is a self-loop");
    const Bus* from = net.find_bus(br.from);
    const Bus* to = net.find_bus(br.to);
    if (!from || !to)
      throw ValidationError(name + " references an unknown bus");
    if (br.phases.empty()) throw ValidationError(name + " carries no phases");
    if (!from->phases.contains(br.phases) || !to->phases.contains(br.phases))
      throw ValidationError(name +
                            " carries phases missing at an end bus");
    int p = br.phases.count();
    if (br.series_impedance.rows() != p || br.series_impedance.cols() != p)
      throw ValidationError(name + " impedance block is not " +
                            std::to_string(p) + "x" + std::to_string(p));
    if (br.shunt_admittance.rows() != p || br.shunt_admittance.cols() != p)
      throw ValidationError(name + " shunt block is not " +
                            std::to_string(p) + "x" + std::to_string(p));
    ++bi;
  }
  (void)bi;

  if (net.tap) {
    const Bus* sb = net.find_bus(net.tap->slack_bus);
    if (!sb || sb->kind != BusKind::slack)
      throw ValidationError("tap changer is not attached to a slack bus");
    if (net.tap->step <= 0.0)
      throw ValidationError("tap step must be positive");
    if (net.tap->n_min > 0 || net.tap->n_max < 0)
      throw ValidationError("tap range must bracket position 0");
    for (Phase p : kAllPhases) {
      if (!sb->phases.has(p)) continue;
      int n = net.tap->position[static_cast<int>(p)];
      if (n < net.tap->n_min || n > net.tap->n_max)
        throw ValidationError("tap position out of range on phase " +
                              std::string(1, phase_char(p)));
    }
  }

  RadialReport r = validate_radial(net);
  if (!r.connected) {
    std::ostringstream os;
    os << "network is disconnected; unreachable buses:";
    for (int id : r.unreachable) os << ' ' << id;
    throw ValidationError(os.str());
  }
}

IndexMap::IndexMap(const NetworkModel& net) {
  std::vector<const Bus*> order;
  order.reserve(net.buses.size());
  std::set<int> ids;
  for (const Bus& b : net.buses) {
    if (!ids.insert(b.id).second)
      throw ValidationError("duplicate bus id " + std::to_string(b.id));
    order.push_back(&b);
  }
  std::sort(order.begin(), order.end(),
            [](const Bus* a, const Bus* b) { return a->id < b->id; });

  for (const Bus* b : order) {
    for (Phase p : kAllPhases) {
      if (!b->phases.has(p)) continue;
      int idx = static_cast<int>(entries_.size());
      entries_.push_back(BusPhase{b->id, p});
      lookup_.emplace(entries_.back(), idx);
      if (b->kind == BusKind::slack) {
        slack_position_.push_back(static_cast<int>(slack_.size()));
        pq_position_.push_back(-1);
        slack_.push_back(idx);
      } else {
        pq_position_.push_back(static_cast<int>(pq_.size()));
        slack_position_.push_back(-1);
        pq_.push_back(idx);
      }
    }
  }
}

BusPhase IndexMap::at(int idx) const {
  if (idx < 0 || idx >= size())
    throw ArgumentError("bus-phase index " + std::to_string(idx) +
                        " out of range");
  return entries_[idx];
}

int IndexMap::index_of(BusPhase bp) const {
  auto it = lookup_.find(bp);
  if (it == lookup_.end())
    throw ArgumentError("bus " + std::to_string(bp.bus) + " phase " +
                        std::string(1, phase_char(bp.phase)) +
                        " does not exist in the network");
  return it->second;
}

std::optional<int> IndexMap::try_index(BusPhase bp) const {
  auto it = lookup_.find(bp);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

namespace {

NetworkModel scale_units(const NetworkModel& in, bool to_pu) {
  if (in.base_power_va <= 0.0 || in.base_voltage_v <= 0.0)
    throw ArgumentError("base power and base voltage must be positive");
  const double z_base =
      in.base_voltage_v * in.base_voltage_v / in.base_power_va;
  const double z_scale = to_pu ? 1.0 / z_base : z_base;
  const double s_scale = to_pu ? 1.0 / in.base_power_va : in.base_power_va;

  NetworkModel out = in;
  for (Bus& b : out.buses)
    for (Phase p : kAllPhases)
      if (b.phases.has(p)) b.injection[static_cast<int>(p)] *= s_scale;
  for (Branch& br : out.branches) {
    br.series_impedance *= z_scale;
    br.shunt_admittance /= z_scale;  // admittance scales inversely
  }
  return out;
}

}  // namespace

NetworkModel to_per_unit(const NetworkModel& raw) {
  return scale_units(raw, true);
}

NetworkModel from_per_unit(const NetworkModel& pu) {
  return scale_units(pu, false);
}

}  // namespace gridsense
