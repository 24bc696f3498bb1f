#include <cmath>
#include <random>

#include "doctest.h"
#include "pilotsim/sim.hpp"
#include "sim_fixtures.hpp"

using namespace pilotsim;
using S = ChargingState;

namespace {

bool same(const SimReport& a, const SimReport& b) {
  if (a.trace.size() != b.trace.size()) return false;
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    const TraceRow &x = a.trace[i], &y = b.trace[i];
    if (x.t != y.t || x.v_evse != y.v_evse || x.v_ev != y.v_ev ||
        x.evse_state != y.evse_state || x.ev_state != y.ev_state ||
        x.drawn_amps != y.drawn_amps || x.soc != y.soc || x.latched != y.latched)
      return false;
  }
  return a.delivered_energy_kwh == b.delivered_energy_kwh &&
         a.final_soc == b.final_soc;
}

void check_invariants(const Scenario& s, const SimReport& r) {
  double energy = 0.0;
  for (const TraceRow& row : r.trace) {
    CHECK(row.drawn_amps <= row.advertised_amps + 1e-12);
    CHECK(row.advertised_amps <= s.charger.max_amps + 1e-12);
    if (row.drawn_amps > 0.0) CHECK(row.evse_state == S::C);
    energy += row.drawn_amps * r.supply_volts * r.tick / 3.6e6;
  }
  CHECK(std::abs(energy - r.delivered_energy_kwh) <= 1e-12 * (1.0 + energy));
}

}  // namespace

TEST_CASE("benign session goes A -> B -> C and draws current") {
  const Scenario s = fixtures::benign();
  const SimReport r = run(s);
  CHECK(r.trace.size() == 1001);
  CHECK(r.trace.front().evse_state == S::A);
  bool saw_b = false;
  for (const auto& row : r.trace) saw_b = saw_b || row.evse_state == S::B;
  CHECK(saw_b);
  CHECK(r.final_evse_state == S::C);
  CHECK(r.final_ev_state == S::C);
  CHECK(r.trace.back().advertised_amps == doctest::Approx(30.0));
  CHECK(r.trace.back().drawn_amps == doctest::Approx(30.0));
  CHECK(r.delivered_energy_kwh > 0.0);
  CHECK(r.final_soc > s.ev.initial_soc);
  CHECK(classify_outcome(r).outcome == Outcome::normal);
  check_invariants(s, r);
}

TEST_CASE("parallel attack forces state C after the EV stops") {
  const Scenario s = fixtures::forced_charging();
  const SimReport r = run(s);
  CHECK(r.flags.unsolicited_energization);
  CHECK_FALSE(r.flags.dos_communication_error);
  CHECK_FALSE(r.flags.latched);
  const TraceRow& last = r.trace.back();
  CHECK(last.evse_state == S::C);
  CHECK(last.contactor_closed);
  CHECK(last.ev_state == S::B);
  CHECK(last.drawn_amps == doctest::Approx(6.0));
  CHECK(r.battery_energy_kwh > 0.0);  // charged before the stop only
  CHECK(classify_outcome(r).outcome == Outcome::forced_charging);
  check_invariants(s, r);

  SUBCASE("energy routed to the battery overruns the charge limit") {
    Scenario full = s;
    full.ev.forced_energy_to_battery = true;
    full.ev.initial_soc = 0.8999;
    full.ev.battery_capacity_kwh = 0.01;
    const SimReport f = run(full);
    CHECK(f.flags.overcharge_past_limit);
    CHECK(f.final_soc > full.ev.charge_limit_fraction);
  }
}

TEST_CASE("serial ramp latches a communication error until replug") {
  const Scenario s = fixtures::serial_dos();
  const SimReport r = run(s);
  CHECK(r.flags.dos_communication_error);
  CHECK(r.flags.latched);
  CHECK(classify_outcome(r).outcome == Outcome::dos);
  bool disparity_seen = false;
  for (const auto& row : r.trace) {
    if (row.evse_state == S::B && row.ev_perceived == S::C) disparity_seen = true;
    // After the latch and before the replug, lowering r_att or removing
    // the attack does not help.
    if (row.t >= 4.0 && row.t < 11.0) CHECK(row.latched);
  }
  CHECK(disparity_seen);
  CHECK(r.final_ev_state == S::B);
  CHECK_FALSE(r.trace.back().latched);
  check_invariants(s, r);
}

TEST_CASE("charging stops at the charge limit") {
  Scenario s = fixtures::benign();
  s.ev.initial_soc = 0.8995;
  s.ev.battery_capacity_kwh = 0.1;
  const SimReport r = run(s);
  CHECK(r.final_ev_state == S::B);
  CHECK(r.final_soc >= s.ev.charge_limit_fraction);
  CHECK(r.final_soc < s.ev.charge_limit_fraction + 0.01);
}

TEST_CASE("duty-cycle attacks reduce the decoded rate") {
  Scenario s = fixtures::benign();
  s.charger = charger2_profile();
  s.charger.max_amps = 16.0;
  s.attack = Tlc555Attack{};
  s.attack_engaged_at_start = true;
  s.duration = 5.0;
  const SimReport r = run(s);
  const auto o = classify_outcome(r);
  CHECK(o.outcome == Outcome::rate_reduced);
  CHECK(o.advertised_amps == doctest::Approx(16.0));
  CHECK(o.ev_amps == doctest::Approx(10.45).epsilon(0.01));
  CHECK(r.trace.back().drawn_amps == doctest::Approx(o.ev_amps));
  check_invariants(s, r);

  FakeLoadAttack fl;
  fl.dt_divider = 0.2535;
  s.attack = fl;
  const SimReport f = run(s);
  const auto fo = classify_outcome(f);
  CHECK(fo.outcome == Outcome::rate_reduced);
  CHECK(fo.ev_amps == doctest::Approx(11.05).epsilon(0.02));
  CHECK(f.final_evse_state == S::C);
  CHECK_FALSE(f.flags.duty_attack_failed);
}

TEST_CASE("scenario validation") {
  Scenario s = fixtures::benign();
  s.timeline = {{2.0, EventKind::plug_in}, {1.0, EventKind::ev_start_charging}};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = fixtures::benign();
  s.duration = 1.5;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = fixtures::benign();
  s.timeline.push_back({3.0, EventKind::engage_attack});
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = fixtures::forced_charging();
  s.timeline.push_back({6.0, EventKind::set_r_att, 1000.0});
  CHECK_NOTHROW(s.validate());
  s.timeline.insert(s.timeline.begin() + 1, {1.5, EventKind::set_r_att, 1000.0});
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);  // not yet engaged
  s = fixtures::benign();
  s.attack = Tlc555Attack{};
  s.attack_engaged_at_start = true;
  s.timeline.push_back({3.0, EventKind::set_r_att, 1000.0});
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);  // not R-based
  s = fixtures::benign();
  s.tick = 0.0;
  CHECK_THROWS_AS(run(s), std::invalid_argument);
}

TEST_CASE("event names round trip") {
  for (EventKind k : {EventKind::plug_in, EventKind::unplug, EventKind::replug,
                      EventKind::set_r_att, EventKind::engage_attack})
    CHECK(parse_event_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_event_kind("explode"), std::invalid_argument);
}

TEST_CASE("randomized timelines: determinism and latch monotonicity") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const Scenario s = fixtures::random_without_replug(rng);
    REQUIRE_NOTHROW(s.validate());
    const SimReport a = run(s);
    const SimReport b = run(s);
    CHECK(same(a, b));
    bool latched = false;
    for (const auto& row : a.trace) {
      if (latched) CHECK(row.latched);
      latched = latched || row.latched;
    }
    check_invariants(s, a);
  }
}
