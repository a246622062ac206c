#pragma once

#include <string>
#include <vector>

#include "gridsense/control.hpp"
#include "gridsense/network.hpp"

namespace gridsense {

struct FeederFile {
  NetworkModel network;  // per-unit, structurally validated
  std::vector<DerSpec> ders;
  RadialReport radial;
};

/// Parses and validates a feeder document; errors carry the JSON path of
/// the offending element. Disconnected networks are rejected; non-radial
/// ones load with radial=false in the report.
FeederFile parse_feeder(const std::string& json_text,
                        const std::string& origin = "<string>");

FeederFile load_feeder(const std::string& path);

NetworkModel load_network(const std::string& path);

/// Serializes back to the feeder schema (physical units). Inverse of
/// parse_feeder up to floating-point round-trip.
std::string feeder_to_json(const NetworkModel& pu_network,
                           const std::vector<DerSpec>& ders = {});

}  // namespace gridsense
