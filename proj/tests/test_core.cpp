#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <random>

#include "doctest.h"
#include "gridsense/admittance.hpp"
#include "gridsense/feeder_json.hpp"
#include "gridsense/loadflow.hpp"
#include "gridsense/network.hpp"
#include "support/random_feeder.hpp"

using namespace gridsense;

namespace {

std::string data_path(const std::string& name) {
  return std::string(GRIDSENSE_DATA_DIR) + "/" + name;
}

NetworkModel two_bus_pu(Complex load) {
  NetworkModel net;
  net.base_power_va = 1.0;
  net.base_voltage_v = 1.0;
  Bus slack;
  slack.id = 1;
  slack.kind = BusKind::slack;
  slack.phases.set(Phase::a);
  slack.slack_voltage[0] = Complex(1.0, 0.0);
  Bus load_bus;
  load_bus.id = 2;
  load_bus.kind = BusKind::pq;
  load_bus.phases.set(Phase::a);
  load_bus.injection[0] = load;
  net.buses = {slack, load_bus};
  Branch br;
  br.from = 1;
  br.to = 2;
  br.phases.set(Phase::a);
  br.series_impedance = Eigen::MatrixXcd::Constant(1, 1, Complex(0.01, 0.1));
  br.shunt_admittance = Eigen::MatrixXcd::Zero(1, 1);
  net.branches = {br};
  return net;
}

}  // namespace

TEST_CASE("phase mask slots and ordering") {
  PhaseMask m;
  m.set(Phase::b);
  CHECK(m.count() == 1);
  CHECK(m.slot(Phase::b) == 0);
  CHECK(m.slot(Phase::a) == -1);
  m.set(Phase::a);
  CHECK(m.slot(Phase::a) == 0);
  CHECK(m.slot(Phase::b) == 1);
  CHECK(m.at(1) == Phase::b);
  CHECK(PhaseMask::abc().contains(m));
  CHECK_FALSE(m.contains(PhaseMask::abc()));
}

TEST_CASE("index map partitions slack and pq deterministically") {
  NetworkModel net = two_bus_pu({0, 0});
  // promote to 3-phase buses
  for (Bus& b : net.buses) {
    b.phases = PhaseMask::abc();
    if (b.kind == BusKind::slack)
      for (Phase p : kAllPhases)
        b.slack_voltage[static_cast<int>(p)] =
            std::polar(1.0, deg_to_rad(nominal_angle_deg(p)));
  }
  net.branches[0].phases = PhaseMask::abc();
  net.branches[0].series_impedance =
      Eigen::MatrixXcd::Identity(3, 3) * Complex(0.01, 0.1);
  net.branches[0].shunt_admittance = Eigen::MatrixXcd::Zero(3, 3);

  IndexMap index(net);
  CHECK(index.size() == 6);
  CHECK(index.slack_indices() == std::vector<int>{0, 1, 2});
  CHECK(index.pq_indices() == std::vector<int>{3, 4, 5});
  CHECK(index.n_pq() == 3);

  // bijection both ways
  for (int i = 0; i < index.size(); ++i)
    CHECK(index.index_of(index.at(i)) == i);
}

TEST_CASE("single-phase bus contributes exactly one index") {
  NetworkModel net = two_bus_pu({0, 0});
  net.buses[1].phases = PhaseMask{};
  net.buses[1].phases.set(Phase::b);
  net.buses[1].injection[1] = Complex(0, 0);
  // keep the branch consistent: slack carries b as well
  net.buses[0].phases.set(Phase::b);
  net.buses[0].slack_voltage[1] = std::polar(1.0, deg_to_rad(-120.0));
  net.branches[0].phases = PhaseMask{};
  net.branches[0].phases.set(Phase::b);

  IndexMap index(net);
  CHECK(index.size() == 3);
  CHECK(index.try_index({2, Phase::b}).has_value());
  CHECK_FALSE(index.try_index({2, Phase::a}).has_value());
  CHECK_THROWS_AS(index.index_of({2, Phase::a}), ArgumentError);
}

TEST_CASE("duplicate bus ids are rejected") {
  NetworkModel net = two_bus_pu({0, 0});
  net.buses[1].id = 1;
  CHECK_THROWS_AS(IndexMap{net}, ValidationError);
}

TEST_CASE("radiality: minimal tree, loop, permutation invariance") {
  NetworkModel net = two_bus_pu({0.1, 0.05});
  RadialReport r = validate_radial(net);
  CHECK(r.radial);
  CHECK(r.connected);
  CHECK(r.slack_count == 1);

  // three buses in a loop
  NetworkModel loop = net;
  Bus third;
  third.id = 3;
  third.kind = BusKind::pq;
  third.phases.set(Phase::a);
  loop.buses.push_back(third);
  Branch b23 = loop.branches[0];
  b23.from = 2;
  b23.to = 3;
  Branch b31 = loop.branches[0];
  b31.from = 3;
  b31.to = 1;
  loop.branches.push_back(b23);
  loop.branches.push_back(b31);
  RadialReport rl = validate_radial(loop);
  CHECK(rl.connected);
  CHECK_FALSE(rl.radial);

  // permuting branches changes nothing
  std::mt19937 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(loop.branches.begin(), loop.branches.end(), rng);
    RadialReport rp = validate_radial(loop);
    CHECK(rp.radial == rl.radial);
    CHECK(rp.connected == rl.connected);
  }
}

TEST_CASE("disconnected networks list unreachable buses") {
  NetworkModel net = two_bus_pu({0, 0});
  Bus island;
  island.id = 9;
  island.kind = BusKind::pq;
  island.phases.set(Phase::a);
  net.buses.push_back(island);
  RadialReport r = validate_radial(net);
  CHECK_FALSE(r.connected);
  CHECK(r.unreachable == std::vector<int>{9});
  CHECK_THROWS_WITH_AS(validate_structure(net),
                       doctest::Contains("unreachable"), ValidationError);
}

TEST_CASE("per-unit conversion and round trip") {
  NetworkModel raw;
  raw.base_power_va = 1e6;
  raw.base_voltage_v = 2000.0;  // Z_base = 4 ohm
  Bus slack;
  slack.id = 1;
  slack.kind = BusKind::slack;
  slack.phases.set(Phase::a);
  slack.slack_voltage[0] = Complex(1.0, 0.0);
  Bus load;
  load.id = 2;
  load.kind = BusKind::pq;
  load.phases.set(Phase::a);
  load.injection[0] = Complex(210e3, 0.0);  // 210 kW
  raw.buses = {slack, load};
  Branch br;
  br.from = 1;
  br.to = 2;
  br.phases.set(Phase::a);
  br.series_impedance = Eigen::MatrixXcd::Constant(1, 1, Complex(4.0, 0.0));
  br.shunt_admittance = Eigen::MatrixXcd::Constant(1, 1, Complex(0.0, 1e-6));
  raw.branches = {br};

  NetworkModel pu = to_per_unit(raw);
  CHECK(pu.branches[0].series_impedance(0, 0).real() == doctest::Approx(1.0));
  CHECK(pu.buses[1].injection[0].real() == doctest::Approx(0.21));
  CHECK(pu.branches[0].shunt_admittance(0, 0).imag() ==
        doctest::Approx(4e-6));  // admittance scales by Z_base

  NetworkModel back = from_per_unit(pu);
  CHECK(back.branches[0].series_impedance(0, 0).real() ==
        doctest::Approx(4.0).epsilon(1e-12));
  CHECK(back.buses[1].injection[0].real() ==
        doctest::Approx(210e3).epsilon(1e-12));

  // identity bases leave everything unchanged
  NetworkModel unit = two_bus_pu({0.25, 0.1});
  NetworkModel same = to_per_unit(unit);
  CHECK(same.branches[0].series_impedance(0, 0) ==
        unit.branches[0].series_impedance(0, 0));
  CHECK(same.buses[1].injection[0] == unit.buses[1].injection[0]);

  raw.base_power_va = 0.0;
  CHECK_THROWS_AS(to_per_unit(raw), ArgumentError);
}

TEST_CASE("compound admittance of the two-bus network") {
  NetworkModel net = two_bus_pu({0, 0});
  IndexMap index(net);
  CompoundAdmittance y = build_compound_admittance(net, index);

  Complex yl = 1.0 / Complex(0.01, 0.1);
  CHECK(yl.real() == doctest::Approx(0.990099).epsilon(1e-5));
  CHECK(yl.imag() == doctest::Approx(-9.90099).epsilon(1e-5));

  CHECK(y.matrix.coeff(0, 0) == yl);
  CHECK(y.matrix.coeff(1, 1) == yl);
  CHECK(y.matrix.coeff(0, 1) == -yl);
  CHECK(y.matrix.coeff(1, 0) == -yl);

  Eigen::VectorXcd sums = row_sums(y);
  CHECK(std::abs(sums[0]) < 1e-12);
  CHECK(std::abs(sums[1]) < 1e-12);

  // a shunt adds +j b/2 on each diagonal block
  NetworkModel shunted = net;
  shunted.branches[0].shunt_admittance =
      Eigen::MatrixXcd::Constant(1, 1, Complex(0.0, 2e-4));
  CompoundAdmittance ys = build_compound_admittance(shunted, index);
  CHECK(std::abs(ys.matrix.coeff(0, 0) - y.matrix.coeff(0, 0) -
                 Complex(0.0, 1e-4)) < 1e-14);
  CHECK(ys.matrix.coeff(0, 1) == y.matrix.coeff(0, 1));

  CHECK(branch_block(y, 1, 2)(0, 0) == yl);
  CHECK(branch_block(y, 2, 1)(0, 0) == yl);  // direction independent
  CHECK_THROWS_AS(branch_block(y, 1, 7), ArgumentError);
}

TEST_CASE("assembly is order independent and row sums vanish without shunts") {
  NetworkModel net = testing::random_radial_network(20, 11, false);
  IndexMap index(net);
  CompoundAdmittance y = build_compound_admittance(net, index);

  Eigen::VectorXcd sums = row_sums(y);
  for (int i = 0; i < y.dimension; ++i) CHECK(std::abs(sums[i]) < 1e-12);

  NetworkModel shuffled = net;
  std::mt19937 rng(3);
  std::shuffle(shuffled.branches.begin(), shuffled.branches.end(), rng);
  CompoundAdmittance y2 = build_compound_admittance(shuffled, index);
  Eigen::MatrixXcd diff = Eigen::MatrixXcd(y.matrix) - Eigen::MatrixXcd(y2.matrix);
  CHECK(diff.cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("sparsity stays linear in the feeder size") {
  FeederFile feeder = load_feeder(data_path("ieee13_like.json"));
  IndexMap index(feeder.network);
  CompoundAdmittance y = build_compound_admittance(feeder.network, index);
  long bound = y.dimension;
  for (const Branch& br : feeder.network.branches) {
    long p2 = 2L * br.phases.count();
    bound += p2 * p2;
  }
  CHECK(static_cast<long>(y.matrix.nonZeros()) <= bound);
}

TEST_CASE("singular branch impedance is reported with the branch name") {
  NetworkModel net = two_bus_pu({0, 0});
  net.branches[0].series_impedance = Eigen::MatrixXcd::Zero(1, 1);
  IndexMap index(net);
  CHECK_THROWS_WITH_AS(build_compound_admittance(net, index),
                       doctest::Contains("1-2"), NumericalError);
}

TEST_CASE("no-load network solves to the slack phasor immediately") {
  FeederFile feeder = load_feeder(data_path("two_bus_noload.json"));
  IndexMap index(feeder.network);
  CompoundAdmittance y = build_compound_admittance(feeder.network, index);
  OperatingPoint op = solve_loadflow(feeder.network, y, index);
  CHECK(op.converged);
  CHECK(op.iterations <= 2);
  CHECK(std::abs(op.voltage[1] - op.voltage[0]) < 1e-12);
}

TEST_CASE("two-bus load flow matches the closed-form quadratic") {
  FeederFile feeder = load_feeder(data_path("two_bus.json"));
  IndexMap index(feeder.network);
  CompoundAdmittance y = build_compound_admittance(feeder.network, index);
  OperatingPoint op = solve_loadflow(feeder.network, y, index);
  CHECK(op.converged);
  CHECK(op.max_mismatch <= 1e-10);

  // scalar two-bus equation: z conj(S_inj) = |E2|^2 - conj(E2), E1 = 1
  Complex z(0.01, 0.1);
  Complex s_inj(-0.1, -0.05);
  Complex c = z * std::conj(s_inj);
  double im = -c.imag();  // E2 = x + j y with y = -Im(c)... solve below
  // |E2|^2 - x + j(-y)... derive: conj(E2) = x - jy
  // x^2 + y^2 - x = Re(c), y = Im(c)
  double yy = c.imag();
  double xx = 0.5 * (1.0 + std::sqrt(1.0 - 4.0 * (yy * yy - c.real())));
  (void)im;
  Complex expected(xx, yy);
  CHECK(std::abs(op.voltage[1] - expected) < 1e-10);
  CHECK(std::abs(op.voltage[1]) < 1.0);
}

TEST_CASE("injected power, losses and mismatch are mutually consistent") {
  FeederFile feeder = load_feeder(data_path("ieee13_like.json"));
  const NetworkModel& net = feeder.network;
  IndexMap index(net);
  CompoundAdmittance y = build_compound_admittance(net, index);
  OperatingPoint op = solve_loadflow(net, y, index);
  REQUIRE(op.converged);
  CHECK(op.max_mismatch <= 1e-10);

  // converged pq injections match the declared absorption
  for (int i : index.pq_indices()) {
    Complex declared = op.injection[i];
    Complex injected = injected_power(op, y, i);
    CHECK(std::abs(injected + declared) < 1e-9);
  }

  // independent residual re-assertion
  Eigen::VectorXcd r = power_mismatch(op, y, index);
  CHECK(r.cwiseAbs().maxCoeff() <= 1e-10);

  // power balance: sum of injections equals the losses
  Complex injected_total = total_injected(op, y);
  Complex losses = total_losses(op, y);
  CHECK(std::abs(injected_total - losses) < 1e-9);
}

TEST_CASE("branch currents: no-load zero, receiving-end consistency, antisymmetry") {
  NetworkModel noload = two_bus_pu({0, 0});
  IndexMap index0(noload);
  CompoundAdmittance y0 = build_compound_admittance(noload, index0);
  OperatingPoint op0 = solve_loadflow(noload, y0, index0);
  auto currents0 = branch_currents(op0, y0);
  CHECK(std::abs(currents0[0][0]) < 1e-12);

  FeederFile feeder = load_feeder(data_path("two_bus.json"));
  IndexMap index(feeder.network);
  CompoundAdmittance y = build_compound_admittance(feeder.network, index);
  OperatingPoint op = solve_loadflow(feeder.network, y, index);
  auto currents = branch_currents(op, y);
  // |I| = |S_abs| / |E2| at the receiving bus
  double expected = std::abs(op.injection[1]) / std::abs(op.voltage[1]);
  CHECK(std::abs(currents[0][0]) == doctest::Approx(expected).epsilon(1e-9));

  // reversing the orientation negates the current
  Eigen::MatrixXcd block = branch_block(y, 1, 2);
  Complex forward = (block * Eigen::VectorXcd::Constant(
                                 1, op.voltage[0] - op.voltage[1]))(0);
  Complex backward = (block * Eigen::VectorXcd::Constant(
                                  1, op.voltage[1] - op.voltage[0]))(0);
  CHECK(std::abs(forward + backward) < 1e-15);
}

TEST_CASE("load flow is deterministic") {
  FeederFile feeder = load_feeder(data_path("ieee13_like.json"));
  IndexMap index(feeder.network);
  CompoundAdmittance y = build_compound_admittance(feeder.network, index);
  OperatingPoint a = solve_loadflow(feeder.network, y, index);
  OperatingPoint b = solve_loadflow(feeder.network, y, index);
  REQUIRE(a.voltage.size() == b.voltage.size());
  for (int i = 0; i < a.voltage.size(); ++i) CHECK(a.voltage[i] == b.voltage[i]);
}

TEST_CASE("externally supplied operating points are wrapped, not iterated") {
  FeederFile feeder = load_feeder(data_path("two_bus.json"));
  IndexMap index(feeder.network);
  CompoundAdmittance y = build_compound_admittance(feeder.network, index);
  Eigen::VectorXcd v(2);
  v << Complex(1.0, 0.0), Complex(0.97, -0.02);
  OperatingPoint op = operating_point_from_voltages(feeder.network, y, index, v);
  CHECK(op.converged);
  CHECK(op.voltage[1] == v[1]);
  // implied injection is the absorbed power at those phasors
  Complex implied = -injected_power(op, y, 1);
  CHECK(std::abs(op.injection[1] - implied) < 1e-15);
}

TEST_CASE("feeder files load with the expected shape") {
  FeederFile two = load_feeder(data_path("two_bus.json"));
  CHECK(two.network.buses.size() == 2);
  CHECK(two.radial.radial);
  IndexMap idx2(two.network);
  CHECK(idx2.size() == 2);
  CHECK(two.network.buses[1].injection[0].real() == doctest::Approx(0.1));

  FeederFile f13 = load_feeder(data_path("ieee13_like.json"));
  CHECK(f13.network.buses.size() == 13);
  CHECK(f13.network.branches.size() == 12);
  CHECK(f13.radial.radial);
  IndexMap idx13(f13.network);
  CHECK(idx13.size() == 32);  // mixed 1/2/3-phase laterals, M < 3K
  CHECK(idx13.size() < 39);
  CHECK(f13.network.tap.has_value());
  CHECK(f13.network.tap->step == doctest::Approx(0.06 / 36.0));

  FeederFile f34 = load_feeder(data_path("ieee34_like.json"));
  CHECK(f34.network.buses.size() == 34);
  CHECK(f34.ders.size() == 4);
  CHECK(f34.ders[0].p_init_kw == doctest::Approx(210.0));
  CHECK(f34.radial.radial);
}

TEST_CASE("schema violations carry the json path") {
  std::string bad_phase = R"({
    "base_power_va": 1e6, "base_voltage_v": 1000,
    "buses": [
      {"id": 1, "kind": "slack", "phases": ["a"],
       "slack_voltage": {"a": {"mag_pu": 1.0, "angle_deg": 0.0}}},
      {"id": 2, "kind": "pq", "phases": ["d"], "injections": {}}
    ],
    "branches": []
  })";
  CHECK_THROWS_WITH_AS(parse_feeder(bad_phase),
                       doctest::Contains("buses[1]"), ValidationError);

  std::string missing_injection = R"({
    "base_power_va": 1e6, "base_voltage_v": 1000,
    "buses": [
      {"id": 1, "kind": "slack", "phases": ["a"],
       "slack_voltage": {"a": {"mag_pu": 1.0, "angle_deg": 0.0}}},
      {"id": 2, "kind": "pq", "phases": ["a", "b"],
       "injections": {"a": {"p_kw": 1.0, "q_kvar": 0.0}}}
    ],
    "branches": []
  })";
  CHECK_THROWS_WITH_AS(parse_feeder(missing_injection),
                       doctest::Contains("missing injection"),
                       ValidationError);

  std::string delta_load = R"({
    "base_power_va": 1e6, "base_voltage_v": 1000,
    "buses": [
      {"id": 1, "kind": "slack", "phases": ["a"],
       "slack_voltage": {"a": {"mag_pu": 1.0, "angle_deg": 0.0}}},
      {"id": 2, "kind": "pq", "phases": ["a"],
       "injections": {"a": {"p_kw": 1.0, "q_kvar": 0.0, "connection": "delta"}}}
    ],
    "branches": [{"from": 1, "to": 2, "phases": ["a"],
                  "r_ohm": [0.01], "x_ohm": [0.1]}]
  })";
  CHECK_THROWS_WITH_AS(parse_feeder(delta_load), doctest::Contains("delta"),
                       ValidationError);

  CHECK_THROWS_AS(load_feeder(data_path("does_not_exist.json")), IoError);
}

TEST_CASE("feeder json round trip preserves the model") {
  FeederFile feeder = load_feeder(data_path("ieee13_like.json"));
  std::string text = feeder_to_json(feeder.network, feeder.ders);
  FeederFile again = parse_feeder(text);

  const NetworkModel& a = feeder.network;
  const NetworkModel& b = again.network;
  REQUIRE(a.buses.size() == b.buses.size());
  REQUIRE(a.branches.size() == b.branches.size());
  for (size_t i = 0; i < a.buses.size(); ++i) {
    CHECK(a.buses[i].id == b.buses[i].id);
    CHECK(a.buses[i].phases == b.buses[i].phases);
    for (Phase p : kAllPhases) {
      if (!a.buses[i].phases.has(p)) continue;
      int pi = static_cast<int>(p);
      CHECK(std::abs(a.buses[i].injection[pi] - b.buses[i].injection[pi]) <=
            1e-12 * (1.0 + std::abs(a.buses[i].injection[pi])));
      CHECK(std::abs(a.buses[i].slack_voltage[pi] -
                     b.buses[i].slack_voltage[pi]) <= 1e-12);
    }
  }
  for (size_t i = 0; i < a.branches.size(); ++i) {
    CHECK((a.branches[i].series_impedance - b.branches[i].series_impedance)
              .cwiseAbs()
              .maxCoeff() <= 1e-12 * a.branches[i].series_impedance.cwiseAbs()
                                         .maxCoeff());
  }
  REQUIRE(a.tap.has_value());
  REQUIRE(b.tap.has_value());
  CHECK(a.tap->step == doctest::Approx(b.tap->step).epsilon(1e-14));
}
