#include "support/random_feeder.hpp"

#include <random>

namespace gridsense::testing {

NetworkModel random_radial_network(int n_buses, std::uint32_t seed,
                                   bool with_shunts) {
  if (n_buses < 2) throw ArgumentError("need at least two buses");
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  NetworkModel net;
  net.base_power_va = 1.0;
  net.base_voltage_v = 1.0;

  Bus slack;
  slack.id = 1;
  slack.kind = BusKind::slack;
  slack.phases = PhaseMask::abc();
  for (Phase p : kAllPhases)
    slack.slack_voltage[static_cast<int>(p)] =
        std::polar(1.0, deg_to_rad(nominal_angle_deg(p)));
  net.buses.push_back(slack);

  const double load_scale = 0.6 / n_buses;
  std::vector<PhaseMask> masks(static_cast<size_t>(n_buses) + 1);
  masks[1] = PhaseMask::abc();

  for (int b = 2; b <= n_buses; ++b) {
    std::uniform_int_distribution<int> pick(1, b - 1);
    int parent = pick(rng);
    const PhaseMask& pmask = masks[static_cast<size_t>(parent)];

    PhaseMask mask;
    if (unit(rng) < 0.7 || pmask.count() == 1) {
      mask = pmask;
    } else {
      while (mask.empty()) {
        for (Phase p : kAllPhases)
          if (pmask.has(p) && unit(rng) < 0.6) mask.set(p);
      }
    }
    masks[static_cast<size_t>(b)] = mask;

    Bus bus;
    bus.id = b;
    bus.kind = BusKind::pq;
    bus.phases = mask;
    for (Phase p : kAllPhases) {
      if (!mask.has(p)) continue;
      double pw = unit(rng) * load_scale;
      double qw = (unit(rng) - 0.4) * load_scale * 0.5;
      bus.injection[static_cast<int>(p)] = Complex(pw, qw);
    }
    net.buses.push_back(bus);

    const int np = mask.count();
    Eigen::MatrixXcd z(np, np);
    std::vector<double> rdiag(static_cast<size_t>(np)), xdiag(static_cast<size_t>(np));
    for (int d = 0; d < np; ++d) {
      rdiag[static_cast<size_t>(d)] = 0.01 + 0.04 * unit(rng);
      xdiag[static_cast<size_t>(d)] = 0.02 + 0.08 * unit(rng);
      z(d, d) = Complex(rdiag[static_cast<size_t>(d)], xdiag[static_cast<size_t>(d)]);
    }
    if (np > 1) {
      double rmin = *std::min_element(rdiag.begin(), rdiag.end());
      double xmin = *std::min_element(xdiag.begin(), xdiag.end());
      for (int r = 0; r < np; ++r)
        for (int c = r + 1; c < np; ++c) {
          double f = (0.1 + 0.35 * unit(rng)) / (np - 1);  // keeps Z dominant
          Complex m(f * rmin, f * xmin);
          z(r, c) = m;
          z(c, r) = m;
        }
    }

    Branch br;
    br.from = parent;
    br.to = b;
    br.phases = mask;
    br.series_impedance = z;
    if (with_shunts && unit(rng) < 0.5) {
      Eigen::MatrixXcd sh = Eigen::MatrixXcd::Zero(np, np);
      for (int d = 0; d < np; ++d)
        sh(d, d) = Complex(0.0, 1e-6 + 4e-5 * unit(rng));
      br.shunt_admittance = sh;
    } else {
      br.shunt_admittance = Eigen::MatrixXcd::Zero(np, np);
    }
    net.branches.push_back(br);
  }
  return net;
}

}  // namespace gridsense::testing
