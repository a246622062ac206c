#pragma once

#include <cstdint>

#include "gridsense/network.hpp"

namespace gridsense::testing {

/// Deterministic random radial feeder on per-unit bases (1, 1): a random
/// tree rooted at a 3-phase slack, phase sets nested along the tree,
/// diagonally dominant coupled impedance blocks, small constant-PQ loads
/// that keep the load flow well inside its convergence region.
NetworkModel random_radial_network(int n_buses, std::uint32_t seed,
                                   bool with_shunts = true);

}  // namespace gridsense::testing
