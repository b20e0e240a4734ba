#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <complex>

#include "gridstorm/model.hpp"

using namespace gridstorm::model;

namespace {

// Minimal two-bus document used by the admittance and island tests.
const char* kTwoBus = R"(
[meta]
f_nominal_hz = 60
s_base_mva = 100

[buses]
1 Slack 345 0 0 0 1.0
2 PQ    345 0 0 0 1.0

[branches]
L1-2 1 2 0.0 0.1 0.0 - BRK-1

[breakers]
BRK-1 7 closed L1-2 test tie

[machines]
G1 1 100 5.0 1.0 0.3 0.05 0.5 0 1.0
)";

} // namespace

TEST_CASE("base 39-bus document inventory") {
  auto m = load_case_file(GRIDSTORM_CASE_FILE);
  CHECK(m.n_buses() == 39);
  CHECK(m.machines.size() == 10);
  int lines = 0, xfmrs = 0, loads = 0;
  for (const auto& br : m.branches) (br.is_transformer() ? xfmrs : lines)++;
  for (const auto& b : m.buses)
    if (b.load_p_mw != 0.0) loads++;
  CHECK(lines == 34);
  CHECK(xfmrs == 12);
  CHECK(loads == 19);
  CHECK(m.inverters.empty()); // MG units only appear via the overlay
  CHECK(m.find_breaker("PCC-24") != nullptr);
  CHECK(m.find_breaker_wire(1) == m.find_breaker("PCC-24"));
}

TEST_CASE("system overlays attach the microgrid units") {
  auto base = load_case_file(GRIDSTORM_CASE_FILE);
  auto m1 = load_case_file(GRIDSTORM_CASE_FILE, SystemMix::I);
  auto m2 = load_case_file(GRIDSTORM_CASE_FILE, SystemMix::II);

  REQUIRE(m1.inverters.size() == 1);
  REQUIRE(m1.machines.size() == 11);
  CHECK(m1.inverters[0].bus == 24);
  CHECK(m1.inverters[0].p_set_mw == doctest::Approx(150.0));
  CHECK(m1.machines.back().bus == 24);
  CHECK(m1.machines.back().p_dispatch_mw == doctest::Approx(150.0));

  CHECK(m2.inverters[0].p_set_mw == doctest::Approx(210.0));
  CHECK(m2.machines.back().p_dispatch_mw == doctest::Approx(90.0));

  // overlay scales the MG bus load, leaves everything else alone
  double base_load = base.bus(24).load_p_mw;
  CHECK(m1.bus(24).load_p_mw == doctest::Approx(base_load * m1.scenario.load_scale));
  CHECK(m1.bus(3).load_p_mw == doctest::Approx(base.bus(3).load_p_mw));
}

TEST_CASE("dangling branch reference names the branch") {
  std::string doc = kTwoBus;
  doc.replace(doc.find("L1-2 1 2"), 8, "L1-2 1 99");
  try {
    load_case(doc);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("L1-2") != std::string::npos);
    CHECK(std::string(e.what()).find("99") != std::string::npos);
  }
}

TEST_CASE("parse errors carry line numbers") {
  CHECK_THROWS_AS(load_case("[buses]\n1 Slack 345 0 0 0 bogus\n"), ParseError);
  CHECK_THROWS_AS(load_case("[buses]\n1 Wedge 345 0 0 0 1.0\n"), ParseError);
  CHECK_THROWS_AS(load_case("[meta]\nstray row here\n"), ParseError);
}

TEST_CASE("validation rejects broken invariants") {
  auto broken = [](const std::string& from, const std::string& to) {
    std::string doc = kTwoBus;
    doc.replace(doc.find(from), from.size(), to);
    return doc;
  };
  // duplicate bus
  CHECK_THROWS_AS(load_case(broken("2 PQ    345", "1 PQ    345")), ValidationError);
  // no slack
  CHECK_THROWS_AS(load_case(broken("1 Slack 345", "1 PQ    345")), ValidationError);
  // zero reactance
  CHECK_THROWS_AS(load_case(broken("0.0 0.1 0.0 -", "0.0 0.0 0.0 -")), ValidationError);
  // breaker controlling an unknown branch
  CHECK_THROWS_AS(load_case(broken("closed L1-2 test", "closed L9-9 test")), ValidationError);
}

TEST_CASE("serialize round-trips the base and overlay models") {
  for (auto mix : {SystemMix::None, SystemMix::I, SystemMix::II}) {
    auto m = load_case_file(GRIDSTORM_CASE_FILE, mix);
    auto m2 = load_case(serialize(m)); // overlay already applied; reload bare
    REQUIRE(m2.n_buses() == m.n_buses());
    REQUIRE(m2.branches.size() == m.branches.size());
    REQUIRE(m2.machines.size() == m.machines.size());
    REQUIRE(m2.inverters.size() == m.inverters.size());
    for (int i = 0; i < m.n_buses(); ++i) {
      CHECK(m2.buses[i].id == m.buses[i].id);
      CHECK(m2.buses[i].load_p_mw == m.buses[i].load_p_mw);
      CHECK(m2.buses[i].v_set == m.buses[i].v_set);
    }
    for (size_t i = 0; i < m.branches.size(); ++i) {
      CHECK(m2.branches[i].x == m.branches[i].x);
      CHECK(m2.branches[i].tap == m.branches[i].tap);
    }
    for (size_t i = 0; i < m.inverters.size(); ++i) {
      CHECK(m2.inverters[i].p_set_mw == m.inverters[i].p_set_mw);
      CHECK(m2.inverters[i].x_out == m.inverters[i].x_out);
    }
    CHECK(serialize(m2) == serialize(m));
  }
}

TEST_CASE("two-bus admittance by hand substitution") {
  auto m = load_case(kTwoBus);
  auto st = initial_breaker_states(m);

  auto y = Eigen::MatrixXcd(build_admittance(m, st, {}));
  const std::complex<double> j10(0.0, 10.0); // 1/(j*0.1)
  CHECK(std::abs(y(0, 0) + j10) < 1e-12);
  CHECK(std::abs(y(1, 1) + j10) < 1e-12);
  CHECK(std::abs(y(0, 1) - j10) < 1e-12);
  CHECK(std::abs(y(1, 0) - j10) < 1e-12);

  st["BRK-1"] = BreakerState::Open;
  auto y_open = Eigen::MatrixXcd(build_admittance(m, st, {}));
  CHECK(y_open.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("active fault adds exactly its shunt on the diagonal") {
  auto m = load_case_file(GRIDSTORM_CASE_FILE);
  REQUIRE(!m.faults.empty());
  auto fault = m.faults[0];
  REQUIRE(fault.bus == 24);
  auto st = initial_breaker_states(m);
  Eigen::MatrixXcd y0 = build_admittance(m, st, {});
  Eigen::MatrixXcd yf = build_admittance(m, st, {fault});
  Eigen::MatrixXcd d = yf - y0;
  int k = m.index_of_bus(24);
  CHECK(std::abs(d(k, k) - fault.y_fault) < 1e-12);
  d(k, k) = 0.0;
  CHECK(d.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("island partition of the 39-bus case") {
  auto m = load_case_file(GRIDSTORM_CASE_FILE, SystemMix::I);
  auto st = initial_breaker_states(m);

  auto all = find_islands(m, st);
  REQUIRE(all.islands.size() == 1);
  CHECK(all.islands[0].size() == 39);
  CHECK(all.has_slack[0]);

  st["PCC-24"] = BreakerState::Open;
  auto split = find_islands(m, st);
  REQUIRE(split.islands.size() == 2);
  int mg = split.island_of_bus(24);
  CHECK(split.islands[mg].size() == 1);
  CHECK(split.islands[1 - mg].size() == 38);
  CHECK(split.energized[mg]);       // MG machine + inverter live on bus 24
  CHECK(!split.has_slack[mg]);
  CHECK(split.has_slack[1 - mg]);
}

TEST_CASE("islanded bus without sources is flagged non-energized") {
  auto m = load_case_file(GRIDSTORM_CASE_FILE); // bare case: nothing at bus 24
  auto st = initial_breaker_states(m);
  st["PCC-24"] = BreakerState::Open;
  auto part = find_islands(m, st);
  int mg = part.island_of_bus(24);
  CHECK(!part.energized[mg]);
}
