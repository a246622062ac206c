#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "gridsense/baselines.hpp"
#include "gridsense/feeder_json.hpp"
#include "gridsense/sensitivity.hpp"
#include "gridsense/validation.hpp"
#include "support/random_feeder.hpp"

using namespace gridsense;

namespace {

std::string data_path(const std::string& name) {
  return std::string(GRIDSENSE_DATA_DIR) + "/" + name;
}

struct Fixture {
  NetworkModel net;
  IndexMap index;
  CompoundAdmittance y;
  OperatingPoint op;

  explicit Fixture(const std::string& file)
      : net(load_network(data_path(file))),
        index(net),
        y(build_compound_admittance(net, index)),
        op(solve_loadflow(net, y, index)) {
    REQUIRE(op.converged);
  }
};

}  // namespace

TEST_CASE("oracle reproduces the two-bus closed forms at no load") {
  Fixture f("two_bus_noload.json");

  PerturbationSpec spec;
  spec.at = {2, Phase::a};
  spec.target = PerturbTarget::active_power;
  OracleColumn dp = fd_oracle(f.net, f.y, f.index, f.op, spec);
  CHECK(dp.dmag[1] == doctest::Approx(0.01).epsilon(1e-5));
  CHECK(std::abs(dp.dmag[1] - 0.01) < 1e-7);

  spec.target = PerturbTarget::reactive_power;
  OracleColumn dq = fd_oracle(f.net, f.y, f.index, f.op, spec);
  CHECK(std::abs(dq.dmag[1] - 0.10) < 1e-7);

  spec.target = PerturbTarget::slack_magnitude;
  spec.at = {1, Phase::a};
  OracleColumn dk = fd_oracle(f.net, f.y, f.index, f.op, spec);
  CHECK(dk.dmag[1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("oracle rejects bad targets and deltas") {
  Fixture f("two_bus.json");
  PerturbationSpec spec;
  spec.at = {1, Phase::a};  // slack
  spec.target = PerturbTarget::active_power;
  CHECK_THROWS_AS(fd_oracle(f.net, f.y, f.index, f.op, spec), ArgumentError);
  spec.at = {2, Phase::a};
  spec.delta = 0.0;
  CHECK_THROWS_AS(fd_oracle(f.net, f.y, f.index, f.op, spec), ArgumentError);
  spec.delta = 1e-5;
  spec.target = PerturbTarget::slack_magnitude;
  CHECK_THROWS_AS(fd_oracle(f.net, f.y, f.index, f.op, spec), ArgumentError);
}

TEST_CASE("finite-difference truncation shrinks at the textbook order") {
  Fixture f("two_bus.json");  // loaded: curvature is nonzero
  SensitivitySystem sys(f.op, f.y, f.index);
  double exact = magnitude_of(sys.solve_dp({2, Phase::a}), f.op.voltage)[1];

  auto oracle_err = [&](FdScheme scheme, double delta) {
    PerturbationSpec spec;
    spec.at = {2, Phase::a};
    spec.target = PerturbTarget::active_power;
    spec.scheme = scheme;
    spec.delta = delta;
    OracleColumn col = fd_oracle(f.net, f.y, f.index, f.op, spec);
    return std::abs(col.dmag[1] - exact);
  };

  double fwd_ratio =
      oracle_err(FdScheme::forward, 2e-3) / oracle_err(FdScheme::forward, 1e-3);
  CHECK(fwd_ratio > 1.5);
  CHECK(fwd_ratio < 2.6);

  double ctr_ratio =
      oracle_err(FdScheme::central, 2e-2) / oracle_err(FdScheme::central, 1e-2);
  CHECK(ctr_ratio > 3.0);
  CHECK(ctr_ratio < 5.2);
}

TEST_CASE("jacobian baseline reproduces the two-bus closed forms") {
  Fixture f("two_bus_noload.json");
  JacobianTables tables = jacobian_sensitivities(f.y, f.index, f.op);
  CHECK(tables.dmag_dP(1, 0) == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(tables.dmag_dQ(1, 0) == doctest::Approx(0.10).epsilon(1e-9));
  // slack rows are zero-extended
  CHECK(tables.dmag_dP(0, 0) == 0.0);
}

TEST_CASE("jacobian and analytical tables agree to solver precision") {
  Fixture f("ieee13_like.json");
  JacobianTables jac = jacobian_sensitivities(f.y, f.index, f.op);
  SensitivitySet set = full_sensitivity(f.op, f.y, f.net, f.index);

  double worst = 0.0;
  for (int i = 0; i < f.index.size(); ++i) {
    for (int l = 0; l < f.index.n_pq(); ++l) {
      double denom = std::max(std::abs(set.voltage.dmag_dP(i, l)), 1e-8);
      worst = std::max(
          worst, std::abs(jac.dmag_dP(i, l) - set.voltage.dmag_dP(i, l)) /
                     denom);
      denom = std::max(std::abs(set.voltage.dmag_dQ(i, l)), 1e-8);
      worst = std::max(
          worst, std::abs(jac.dmag_dQ(i, l) - set.voltage.dmag_dQ(i, l)) /
                     denom);
    }
  }
  CHECK(worst <= 1e-5);
  CHECK(worst <= 1e-9);  // both routes are exact; agreement is numerical only
}

TEST_CASE("validation rows cover every coefficient family") {
  Fixture f("two_bus.json");
  std::vector<ValidationRow> rows =
      validate_sensitivities(f.net, f.y, f.index, f.op);

  int volt = 0, cur = 0, tap = 0;
  for (const ValidationRow& r : rows) {
    switch (r.kind) {
      case ValidationRow::Kind::voltage_p:
      case ValidationRow::Kind::voltage_q:
        ++volt;
        CHECK(std::isfinite(r.jacobian));
        break;
      case ValidationRow::Kind::current_p:
      case ValidationRow::Kind::current_q:
        ++cur;
        CHECK(std::isnan(r.jacobian));
        break;
      case ValidationRow::Kind::tap:
        ++tap;
        CHECK(std::isnan(r.jacobian));
        break;
    }
    CHECK(r.err_oracle <= 1e-3);
  }
  CHECK(volt == 2 * 2);  // M=2 rows for one pq column, P and Q
  CHECK(cur == 2);
  CHECK(tap == 1);
}

TEST_CASE("benchmark reports sane statistics and matching methods") {
  Fixture f("ieee13_like.json");
  BenchmarkReport report = benchmark(f.y, f.index, f.op, 40, "ieee13");
  CHECK(report.repetitions == 40);
  CHECK(report.n_pq == f.index.n_pq());
  CHECK(report.jacobian_mean_ms > 0.0);
  CHECK(report.analytical_mean_ms > 0.0);
  CHECK(report.ratio == doctest::Approx(report.jacobian_mean_ms /
                                        report.analytical_mean_ms));
  CHECK(report.jacobian_ci_ms >= 0.0);
  CHECK_THROWS_AS(benchmark(f.y, f.index, f.op, 5, "too-few"), ArgumentError);

  MESSAGE("jacobian ", report.jacobian_mean_ms, " ms, analytical ",
          report.analytical_mean_ms, " ms, ratio ", report.ratio);
}
