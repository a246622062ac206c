#include "gridsense/feeder_json.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace gridsense {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ValidationError(path + ": " + what);
}

const json& member(const json& node, const std::string& key,
                   const std::string& path) {
  auto it = node.find(key);
  if (it == node.end()) fail(path, "missing key '" + key + "'");
  return *it;
}

double number_at(const json& node, const std::string& key,
                 const std::string& path) {
  const json& v = member(node, key, path);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

int int_at(const json& node, const std::string& key, const std::string& path) {
  const json& v = member(node, key, path);
  if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
  return v.get<int>();
}

Phase parse_phase(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "phase must be a string");
  std::string s = v.get<std::string>();
  if (s.size() == 1) {
    switch (s[0]) {
      case 'a': return Phase::a;
      case 'b': return Phase::b;
      case 'c': return Phase::c;
      default: break;
    }
  }
  fail(path, "invalid phase '" + s + "' (expected a, b or c)");
}

PhaseMask parse_phases(const json& node, const std::string& path) {
  if (!node.is_array() || node.empty())
    fail(path, "expected a non-empty array of phases");
  PhaseMask mask;
  int i = 0;
  for (const json& v : node) {
    Phase p = parse_phase(v, path + "[" + std::to_string(i) + "]");
    if (mask.has(p)) fail(path, "duplicate phase");
    mask.set(p);
    ++i;
  }
  return mask;
}

Eigen::MatrixXd parse_square(const json& node, int p, const std::string& path) {
  if (!node.is_array() || static_cast<int>(node.size()) != p * p)
    fail(path, "expected a row-major array of " + std::to_string(p * p) +
                   " numbers");
  Eigen::MatrixXd m(p, p);
  for (int r = 0; r < p; ++r)
    for (int c = 0; c < p; ++c) {
      const json& v = node[static_cast<size_t>(r * p + c)];
      if (!v.is_number())
        fail(path + "[" + std::to_string(r * p + c) + "]",
             "expected a number");
      m(r, c) = v.get<double>();
    }
  return m;
}

Bus parse_bus(const json& node, const std::string& path) {
  Bus bus;
  bus.id = int_at(node, "id", path);
  std::string kind = member(node, "kind", path).get<std::string>();
  if (kind == "slack")
    bus.kind = BusKind::slack;
  else if (kind == "pq")
    bus.kind = BusKind::pq;
  else
    fail(path + ".kind", "expected 'slack' or 'pq'");
  bus.phases = parse_phases(member(node, "phases", path), path + ".phases");

  if (bus.kind == BusKind::pq) {
    const json& inj = member(node, "injections", path);
    if (!inj.is_object()) fail(path + ".injections", "expected an object");
    for (auto it = inj.begin(); it != inj.end(); ++it) {
      Phase p = parse_phase(json(it.key()), path + ".injections");
      if (!bus.phases.has(p))
        fail(path + ".injections", "injection on undeclared phase '" +
                                       std::string(1, phase_char(p)) + "'");
      const json& e = it.value();
      std::string epath = path + ".injections." + it.key();
      if (e.contains("connection") &&
          e["connection"].get<std::string>() != "wye")
        fail(epath,
             "only wye-connected constant-PQ loads are supported; convert "
             "delta loads before ingestion");
      double p_kw = number_at(e, "p_kw", epath);
      double q_kvar = number_at(e, "q_kvar", epath);
      bus.injection[static_cast<int>(p)] =
          Complex(p_kw * 1e3, q_kvar * 1e3);  // VA until to_per_unit
    }
    for (Phase p : kAllPhases)
      if (bus.phases.has(p) && !inj.contains(std::string(1, phase_char(p))))
        fail(path + ".injections",
             "missing injection for declared phase '" +
                 std::string(1, phase_char(p)) + "'");
    if (node.contains("slack_voltage"))
      fail(path, "pq bus must not declare slack_voltage");
  } else {
    const json& sv = member(node, "slack_voltage", path);
    if (!sv.is_object()) fail(path + ".slack_voltage", "expected an object");
    for (Phase p : kAllPhases) {
      std::string key(1, phase_char(p));
      if (!bus.phases.has(p)) {
        if (sv.contains(key))
          fail(path + ".slack_voltage", "voltage on undeclared phase");
        continue;
      }
      if (!sv.contains(key))
        fail(path + ".slack_voltage",
             "missing voltage for declared phase '" + key + "'");
      const json& e = sv[key];
      std::string epath = path + ".slack_voltage." + key;
      double mag = number_at(e, "mag_pu", epath);
      double ang = number_at(e, "angle_deg", epath);
      if (mag <= 0.0) fail(epath + ".mag_pu", "must be positive");
      bus.slack_voltage[static_cast<int>(p)] =
          std::polar(mag, deg_to_rad(ang));
    }
    if (node.contains("injections"))
      fail(path, "slack bus must not declare injections");
  }
  return bus;
}

Branch parse_branch(const json& node, const std::string& path) {
  Branch br;
  br.from = int_at(node, "from", path);
  br.to = int_at(node, "to", path);
  br.phases = parse_phases(member(node, "phases", path), path + ".phases");
  const int p = br.phases.count();
  Eigen::MatrixXd r = parse_square(member(node, "r_ohm", path), p,
                                   path + ".r_ohm");
  Eigen::MatrixXd x = parse_square(member(node, "x_ohm", path), p,
                                   path + ".x_ohm");
  Eigen::MatrixXd b = node.contains("b_us")
                          ? parse_square(node["b_us"], p, path + ".b_us")
                          : Eigen::MatrixXd::Zero(p, p);
  br.series_impedance = r.cast<Complex>() + Complex(0, 1) * x.cast<Complex>();
  br.shunt_admittance = Complex(0, 1) * (b * 1e-6).cast<Complex>();
  return br;
}

TapChanger parse_tap(const json& node, const std::string& path) {
  TapChanger tap;
  tap.slack_bus = int_at(node, "slack_bus", path);
  tap.n_min = int_at(node, "n_min", path);
  tap.n_max = int_at(node, "n_max", path);
  tap.step = number_at(node, "step_pu", path);
  const json& pos = member(node, "position", path);
  if (!pos.is_object()) fail(path + ".position", "expected an object");
  for (auto it = pos.begin(); it != pos.end(); ++it) {
    Phase p = parse_phase(json(it.key()), path + ".position");
    if (!it.value().is_number_integer())
      fail(path + ".position." + it.key(), "expected an integer");
    tap.position[static_cast<int>(p)] = it.value().get<int>();
  }
  return tap;
}

DerSpec parse_der(const json& node, const std::string& path) {
  DerSpec der;
  der.bus = int_at(node, "bus", path);
  der.p_init_kw = number_at(node, "p_init_kw", path);
  der.p_max_kw = number_at(node, "p_max_kw", path);
  der.q_min_kvar = number_at(node, "q_min_kvar", path);
  der.q_max_kvar = number_at(node, "q_max_kvar", path);
  if (node.contains("q_init_kvar"))
    der.q_init_kvar = number_at(node, "q_init_kvar", path);
  if (der.p_max_kw < 0) fail(path + ".p_max_kw", "must be non-negative");
  if (der.p_init_kw < 0 || der.p_init_kw > der.p_max_kw)
    fail(path + ".p_init_kw", "must lie in [0, p_max_kw]");
  if (der.q_min_kvar > der.q_max_kvar)
    fail(path + ".q_min_kvar", "exceeds q_max_kvar");
  if (der.q_init_kvar < der.q_min_kvar || der.q_init_kvar > der.q_max_kvar)
    fail(path + ".q_init_kvar", "outside [q_min_kvar, q_max_kvar]");
  return der;
}

}  // namespace

FeederFile parse_feeder(const std::string& json_text,
                        const std::string& origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(origin + ": " + e.what());
  }
  if (!doc.is_object()) throw ValidationError(origin + ": expected an object");

  NetworkModel raw;
  raw.base_power_va = number_at(doc, "base_power_va", origin);
  raw.base_voltage_v = number_at(doc, "base_voltage_v", origin);
  if (raw.base_power_va <= 0 || raw.base_voltage_v <= 0)
    throw ValidationError(origin + ": bases must be positive");

  const json& buses = member(doc, "buses", origin);
  if (!buses.is_array() || buses.empty())
    fail(origin + ".buses", "expected a non-empty array");
  int i = 0;
  for (const json& b : buses)
    raw.buses.push_back(
        parse_bus(b, origin + ".buses[" + std::to_string(i++) + "]"));

  const json& branches = member(doc, "branches", origin);
  if (!branches.is_array())
    fail(origin + ".branches", "expected an array");
  i = 0;
  for (const json& b : branches)
    raw.branches.push_back(
        parse_branch(b, origin + ".branches[" + std::to_string(i++) + "]"));

  if (doc.contains("tap")) raw.tap = parse_tap(doc["tap"], origin + ".tap");

  FeederFile out;
  out.network = to_per_unit(raw);
  validate_structure(out.network);
  out.radial = validate_radial(out.network);

  if (doc.contains("ders")) {
    const json& ders = doc["ders"];
    if (!ders.is_array()) fail(origin + ".ders", "expected an array");
    i = 0;
    for (const json& d : ders) {
      DerSpec der =
          parse_der(d, origin + ".ders[" + std::to_string(i++) + "]");
      if (!out.network.find_bus(der.bus))
        fail(origin + ".ders", "unknown bus " + std::to_string(der.bus));
      out.ders.push_back(der);
    }
  }
  return out;
}

FeederFile load_feeder(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feeder file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failure on feeder file: " + path);
  return parse_feeder(buf.str(), path);
}

NetworkModel load_network(const std::string& path) {
  return load_feeder(path).network;
}

std::string feeder_to_json(const NetworkModel& pu_network,
                           const std::vector<DerSpec>& ders) {
  NetworkModel raw = from_per_unit(pu_network);
  json doc;
  doc["base_power_va"] = raw.base_power_va;
  doc["base_voltage_v"] = raw.base_voltage_v;

  json buses = json::array();
  for (const Bus& b : raw.buses) {
    json jb;
    jb["id"] = b.id;
    jb["kind"] = b.kind == BusKind::slack ? "slack" : "pq";
    json phases = json::array();
    for (Phase p : kAllPhases)
      if (b.phases.has(p)) phases.push_back(std::string(1, phase_char(p)));
    jb["phases"] = phases;
    if (b.kind == BusKind::pq) {
      json inj;
      for (Phase p : kAllPhases) {
        if (!b.phases.has(p)) continue;
        Complex s = b.injection[static_cast<int>(p)];
        inj[std::string(1, phase_char(p))] = {{"p_kw", s.real() / 1e3},
                                              {"q_kvar", s.imag() / 1e3}};
      }
      jb["injections"] = inj;
    } else {
      json sv;
      for (Phase p : kAllPhases) {
        if (!b.phases.has(p)) continue;
        Complex v = b.slack_voltage[static_cast<int>(p)];
        sv[std::string(1, phase_char(p))] = {
            {"mag_pu", std::abs(v)}, {"angle_deg", rad_to_deg(std::arg(v))}};
      }
      jb["slack_voltage"] = sv;
    }
    buses.push_back(jb);
  }
  doc["buses"] = buses;

  json branches = json::array();
  for (const Branch& br : raw.branches) {
    json jb;
    jb["from"] = br.from;
    jb["to"] = br.to;
    json phases = json::array();
    for (Phase p : kAllPhases)
      if (br.phases.has(p)) phases.push_back(std::string(1, phase_char(p)));
    jb["phases"] = phases;
    const int p = br.phases.count();
    json r = json::array(), x = json::array(), b = json::array();
    for (int rr = 0; rr < p; ++rr)
      for (int cc = 0; cc < p; ++cc) {
        r.push_back(br.series_impedance(rr, cc).real());
        x.push_back(br.series_impedance(rr, cc).imag());
        b.push_back(br.shunt_admittance(rr, cc).imag() * 1e6);
      }
    jb["r_ohm"] = r;
    jb["x_ohm"] = x;
    jb["b_us"] = b;
    branches.push_back(jb);
  }
  doc["branches"] = branches;

  if (raw.tap) {
    json jt;
    jt["slack_bus"] = raw.tap->slack_bus;
    jt["n_min"] = raw.tap->n_min;
    jt["n_max"] = raw.tap->n_max;
    jt["step_pu"] = raw.tap->step;
    json pos;
    const Bus& sb = raw.bus_at(raw.tap->slack_bus);
    for (Phase p : kAllPhases)
      if (sb.phases.has(p))
        pos[std::string(1, phase_char(p))] =
            raw.tap->position[static_cast<int>(p)];
    jt["position"] = pos;
    doc["tap"] = jt;
  }

  if (!ders.empty()) {
    json jders = json::array();
    for (const DerSpec& d : ders) {
      jders.push_back({{"bus", d.bus},
                       {"p_init_kw", d.p_init_kw},
                       {"p_max_kw", d.p_max_kw},
                       {"q_min_kvar", d.q_min_kvar},
                       {"q_max_kvar", d.q_max_kvar},
                       {"q_init_kvar", d.q_init_kvar}});
    }
    doc["ders"] = jders;
  }

  return doc.dump(2) + "\n";
}

}  // namespace gridsense
