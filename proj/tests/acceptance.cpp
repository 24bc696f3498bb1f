// Acceptance run: one PASS/FAIL line per primary criterion, each with its
// runtime. Extra INFO lines carry informational comparisons that are not
// pass/fail. Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "nodal_oracle.hpp"
#include "pilotsim/analysis.hpp"
#include "pilotsim/attacks.hpp"
#include "pilotsim/io.hpp"
#include "pilotsim/sim.hpp"
#include "pilotsim/waveform.hpp"
#include "sim_fixtures.hpp"

using namespace pilotsim;

namespace {

const std::filesystem::path kData = PILOTSIM_DATA_DIR;

// Collects failed sub-checks; the criterion passes when none failed.
struct Check {
  std::vector<std::string> failures;
  std::vector<std::string> info;

  void expect(bool ok, std::string what) {
    if (!ok) failures.push_back(std::move(what));
  }
  void near(double got, double want, double tol, const std::string& what) {
    expect(std::abs(got - want) <= tol,
           fmt::format("{}: got {:.6g}, want {:.6g} +/- {:.3g}", what, got, want, tol));
  }
};

int failures = 0;

void criterion(const std::string& name, double budget_s,
               const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.failures.push_back(std::string("exception: ") + e.what());
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > budget_s)
    c.failures.push_back(fmt::format("runtime {:.3f} s over the {} s budget", secs, budget_s));
  const bool ok = c.failures.empty();
  failures += ok ? 0 : 1;
  fmt::print("{} {} ({:.3f} s)\n", ok ? "PASS" : "FAIL", name, secs);
  for (const auto& f : c.failures) fmt::print("    - {}\n", f);
  for (const auto& i : c.info) fmt::print("  INFO {}\n", i);
}

// ---------------------------------------------------------------------------

void duty_codec(Check& c) {
  const double rows[][2] = {{10, 6},  {16.6, 10}, {17.4, 10.4}, {18.4, 11},
                            {25, 15}, {26.7, 16}, {50, 30},     {53.3, 32}};
  for (const auto& [duty, amps] : rows)
    c.near(advertised_amps(duty_to_current(DutyCycle(duty))), amps, 0.05,
           fmt::format("{} %", duty));
  c.near(advertised_amps(duty_to_current(DutyCycle(97.0))), 80.0, 1e-12, "97 % clamp");
  c.expect(duty_to_current(DutyCycle(5.0)).band == DutyBand::digital_comm,
           "5 % is not the digital band");
}

// Boundary found by brute force on a 1 ohm grid: the last grid point for
// which `inside` holds, scanning upward from 0.
double last_inside(AttackKind kind, const ChargerProfile& ch, const EvProfile& ev,
                   ChargingState load, const std::function<bool(const SweepRow&)>& inside) {
  const auto grid = linear_grid(0.0, 10000.0, 10001);
  const auto rows = sweep(kind, grid, ch, ev, load);
  double last = -1.0;
  for (const auto& r : rows)
    if (inside(r)) last = r.r_att;
  return last;
}

double first_inside(AttackKind kind, const ChargerProfile& ch, const EvProfile& ev,
                    ChargingState load, const std::function<bool(const SweepRow&)>& inside) {
  const auto grid = linear_grid(0.0, 10000.0, 10001);
  for (const auto& r : sweep(kind, grid, ch, ev, load))
    if (inside(r)) return r.r_att;
  return -1.0;
}

void parallel_ranges(Check& c) {
  const auto ch = charger2_profile();
  const auto ev = tesla_model3_profile();
  const auto bc = parallel_range(Goal::b_to_c, ch, ev);
  const auto cf = parallel_range(Goal::c_to_f, ch, ev);
  const auto bf = parallel_range(Goal::b_to_f, ch, ev);
  const double bc_lo = bc.r_min->ohms(), bc_hi = bc.r_max->ohms();
  const double cf_hi = cf.r_max->ohms(), bf_hi = bf.r_max->ohms();

  c.near(bc_lo, 1680.0, 0.01 * bc_lo, "B->C lower");
  c.near(bc_hi, 5760.0, 0.01 * bc_hi, "B->C upper");
  c.near(cf_hi, 1680.0, 0.01 * cf_hi, "C->F upper");
  c.near(bf_hi, 730.0, 0.01 * bf_hi, "B->F upper");

  using K = AttackKind;
  using S = ChargingState;
  // B->C upper: EVSE still reads C with the EV presenting its B load.
  const double sweep_bc_hi = last_inside(K::parallel, ch, ev, S::B, [](const SweepRow& r) {
    return r.evse_state == S::C;
  });
  // B->C lower: once the EV switches to its C load, the pilot must stay
  // clear of F on both sides.
  const double sweep_bc_lo = first_inside(K::parallel, ch, ev, S::C, [](const SweepRow& r) {
    return r.evse_state == S::C && r.ev_state == S::C;
  });
  const double sweep_cf = last_inside(K::parallel, ch, ev, S::C, [](const SweepRow& r) {
    return r.evse_state == S::F;
  });
  const double sweep_bf = last_inside(K::parallel, ch, ev, S::B, [](const SweepRow& r) {
    return r.evse_state == S::F;
  });
  c.near(sweep_bc_hi, bc_hi, 1.0, "sweep B->C upper");
  c.near(sweep_bc_lo, bc_lo, 1.0, "sweep B->C lower");
  c.near(sweep_cf, cf_hi, 1.0, "sweep C->F upper");
  c.near(sweep_bf, bf_hi, 1.0, "sweep B->F upper");
  c.info.push_back(fmt::format(
      "closed form B->C [{:.1f}, {:.1f}], C->F <= {:.1f}, B->F <= {:.1f} ohm; "
      "sweep [{}, {}], {}, {}",
      bc_lo, bc_hi, cf_hi, bf_hi, sweep_bc_lo, sweep_bc_hi, sweep_cf, sweep_bf));

  // On-vehicle measurements, checked for containment only.
  struct Fixture {
    const char* charger;
    double bc_lo, bc_hi, cf_hi, bf_hi;
  };
  const Fixture measured[] = {{"charger1", 1800, 5000, 930, 10},
                              {"charger2", 2000, 5300, 500, 250},
                              {"public_charger", 1500, 5800, 850, 310}};
  const auto set = io::builtin_profiles();
  for (const auto& m : measured) {
    const auto& p = set.charger(m.charger);
    const auto r = parallel_range(Goal::b_to_c, p, ev);
    const bool bc_in = r.contains(m.bc_lo) && r.contains(m.bc_hi);
    // The vehicle itself faults on a low pilot, so the F bounds use the
    // charger-2 thresholds when the charger has no F of its own.
    const auto f_ref = p.has_state_f ? p : ch;
    const bool cf_in = m.cf_hi <= parallel_range(Goal::c_to_f, f_ref, ev).r_max->ohms();
    const bool bf_in = m.bf_hi <= parallel_range(Goal::b_to_f, f_ref, ev).r_max->ohms();
    c.info.push_back(fmt::format(
        "vehicle fixture {}: B->C {}-{} {}, C->F <= {} {}, B->F <= {} {}", m.charger,
        m.bc_lo, m.bc_hi, bc_in ? "inside" : "outside", m.cf_hi,
        cf_in ? "inside" : "outside", m.bf_hi, bf_in ? "inside" : "outside"));
  }
}

void serial_thresholds(Check& c) {
  const auto ch = charger2_profile();
  const auto ev = tesla_model3_profile();
  const auto b = serial_range(Goal::a_b_c, ch, ev);
  const auto cc = serial_range(Goal::b_c_f, ch, ev);
  c.near(b.lambda, 2.8, 1e-12, "state-B lambda");
  c.near(cc.lambda, 3.4, 1e-12, "state-C lambda");
  c.near(b.guaranteed.ohms(), 1138.0, 1.138, "state-B threshold");
  c.near(cc.guaranteed.ohms(), 744.07, 0.744, "state-C threshold");
  // The solver reproduces lambda at the threshold.
  c.near(solve_serial(ch.source, b.guaranteed, ev.r_state_b).v_diff, 2.8, 1e-9,
         "V_diff at state-B threshold");
  c.near(solve_serial(ch.source, cc.guaranteed, ev.r_state_c).v_diff, 3.4, 1e-9,
         "V_diff at state-C threshold");

  // Published estimates, compared at an informational 30 % tolerance.
  const struct {
    const char* what;
    double computed, published;
  } cmp[] = {{"charger1 A<-B->C", b.guaranteed.ohms(), 1000.0},
             {"charger2 A<-B->C", b.guaranteed.ohms(), 930.0},
             {"charger1 B<-C->F", cc.guaranteed.ohms(), 630.0},
             {"charger2 B<-C->F", cc.guaranteed.ohms(), 590.0}};
  for (const auto& x : cmp) {
    const double rel = (x.computed - x.published) / x.published;
    c.expect(std::abs(rel) <= 0.30,
             fmt::format("{} differs from the published {} ohm by {:.0f} %", x.what,
                         x.published, 100.0 * rel));
    c.info.push_back(fmt::format(
        "{}: computed {:.1f} ohm vs published >= {} ohm ({:+.1f} %); the published "
        "figure does not state its lambda or R1",
        x.what, x.computed, x.published, 100.0 * rel));
  }
}

void automation(Check& c) {
  const AutomationAttack att;
  const auto idle = automation_output(att, 12.0);
  const auto hit = automation_output(att, 9.0);
  c.expect(!idle.active, "active at 12 V");
  c.near(idle.v_out, 12.0, 0.0, "output at 12 V");
  c.expect(hit.active, "inactive at 9 V");
  c.near(hit.v_out, 6.0, 0.0, "output at 9 V");
  c.expect(classify_state(hit.v_out, charger2_profile()) == ChargingState::C,
           "6 V is not state C");
}

void duty_attacks(Check& c) {
  const auto ch = charger2_profile();
  const SampledSignal evse = synthesize({1000.0, DutyCycle(26.5), 12.0, -12.0}, 0.05);
  const Measurement m_evse = measure(evse);
  const Measurement m_ev = measure(tlc555_apply(Tlc555Attack{}, evse));
  c.near(m_evse.duty, 26.5, 0.2, "TLC555 EVSE-side duty");
  c.near(m_ev.duty, 17.41, 0.5, "TLC555 EV-side duty");
  const double amps = advertised_amps(duty_to_current(DutyCycle(m_ev.duty)));
  c.expect(std::floor(amps) == 10.0, fmt::format("TLC555 EV decodes {:.3g} A", amps));
  c.info.push_back(fmt::format("TLC555: EVSE {:.3f} %, EV {:.3f} % -> {:.2f} A",
                               m_evse.duty, m_ev.duty, amps));

  // Fake load, with the EVSE side held at the fake-load level.
  const double v_fake = solve_baseline(ch.source, FakeLoadAttack{}.r_f).v_evse;
  const SampledSignal pilot = synthesize({1000.0, DutyCycle(26.5), v_fake, -12.0}, 0.05);
  const auto r = fake_load_transform(FakeLoadAttack{}, pilot, Resistance(882.0), ch);
  const Measurement fl = measure(r.ev_side);
  const double fl_amps = advertised_amps(duty_to_current(DutyCycle(fl.duty)));
  c.near(fl.duty, 18.42, 1.0, "fake-load EV-side duty");
  c.expect(std::floor(fl_amps) == 11.0, fmt::format("fake load EV decodes {:.3g} A", fl_amps));
  c.expect(classify_state(v_fake, ch) == ChargingState::C, "EVSE side leaves C");
  c.expect(!r.attack_failed, "fake load reported failure");
  c.info.push_back(fmt::format("fake load: EVSE {:.3f} V (state {}), EV {:.3f} % -> {:.2f} A",
                               v_fake, to_char(classify_state(v_fake, ch)), fl.duty,
                               fl_amps));
}

void scenarios(Check& c) {
  const auto set = io::builtin_profiles();
  auto timed = [&](const char* name) {
    const auto t0 = std::chrono::steady_clock::now();
    const Scenario s = io::load_scenario(kData / "scenarios" / (std::string(name) + ".json"), set);
    SimReport r = run(s);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.expect(secs < 2.0, fmt::format("{} took {:.3f} s", name, secs));
    c.info.push_back(fmt::format("{}: {} in {:.3f} s", name,
                                 classify_outcome(r).text, secs));
    return r;
  };
  using S = ChargingState;

  const SimReport benign = timed("benign");
  std::string seq;
  for (const auto& row : benign.trace)
    if (seq.empty() || seq.back() != to_char(row.evse_state)) seq += to_char(row.evse_state);
  c.expect(seq == "ABC", "benign EVSE sequence " + seq);
  c.expect(benign.trace.back().drawn_amps > 0.0, "benign draws no current");

  const SimReport forced = timed("forced_charging");
  c.expect(forced.flags.unsolicited_energization, "no unsolicited energization");
  c.expect(forced.final_evse_state == S::C, "forced: EVSE not in C");
  c.expect(forced.final_ev_state == S::B, "forced: EV not stopped");

  const SimReport dos = timed("serial_dos");
  c.expect(dos.flags.dos_communication_error, "no communication error");
  bool latched = false, survived = true;
  double latch_t = -1.0;
  for (const auto& row : dos.trace) {
    if (row.latched && !latched) latch_t = row.t;
    latched = latched || row.latched;
    // r_att returns to 0 at 8 s and the attack is removed at 9 s; the
    // latch must hold until the replug at 11 s.
    if (latched && row.t < 11.0 && !row.latched) survived = false;
  }
  c.expect(latched, "EV never latched");
  c.expect(survived && latch_t < 8.0, "latch cleared before replug");
  c.expect(!dos.trace.back().latched, "replug did not clear the latch");
}

void properties(Check& c) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  // Closed-form solvers vs nodal analysis.
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    PilotSource src;
    src.v_high = 5.0 + 10.0 * u(rng);
    src.r1 = Resistance(100.0 + 9900.0 * u(rng));
    const DiodeModel d{u(rng) < 0.5 ? 0.0 : 0.8 * u(rng), true};
    const DiodeModel da{u(rng) < 0.5 ? d.forward_drop : 0.8 * u(rng), true};
    const double rv = std::pow(10.0, 1.0 + 4.0 * u(rng));
    const double ra = u(rng) < 0.02 ? 0.0 : std::pow(10.0, 1.0 + 4.0 * u(rng));
    const auto s = solve_serial(src, Resistance(ra), Resistance(rv), d);
    const auto os = oracle::solve({src.v_high, src.r1.ohms(), ra, rv, d.forward_drop,
                                   std::nullopt, 0.0});
    const auto p = solve_parallel(src, Resistance(ra), Resistance(rv), d, da);
    const auto op = oracle::solve({src.v_high, src.r1.ohms(), 0.0, rv, d.forward_drop, ra,
                                   da.forward_drop});
    worst = std::max({worst, std::abs(s.v_evse - os.v_evse), std::abs(s.v_ev - os.v_ev),
                      std::abs(p.v_evse - op.v_evse)});
  }
  c.expect(worst <= 1e-9, fmt::format("nodal mismatch {:.3g} V", worst));
  c.info.push_back(fmt::format("nodal oracle: worst |dV| {:.3g} V over 10^4 networks", worst));

  // Codec round trip over the whole current range.
  int bad = 0;
  double first_bad = NAN, last_bad = NAN;
  for (int k = 0; k <= 7400; ++k) {
    const double a = 6.0 + 0.01 * k;
    bool ok = false;
    try {
      ok = std::abs(duty_to_current(current_to_duty(a)).amps - a) <= 1e-9;
    } catch (const DomainError&) {
    }
    if (!ok) {
      if (bad++ == 0) first_bad = a;
      last_bad = a;
    }
  }
  c.expect(bad == 0, fmt::format("codec round trip fails for {} of 7401 currents in "
                                 "[{:.2f}, {:.2f}] A: the duty map jumps from 51 A to "
                                 "52.5 A at 85 %, so those currents have no encoding",
                                 bad, first_bad, last_bad));

  // RC filter vs the analytic exponential on each constant segment.
  const double tau = 1e-3;
  const auto x = synthesize({1000.0, DutyCycle(30.0), 12.0, 0.0}, 0.02);
  const auto y = rc_filter(x, RcStage{tau}, 0.0);
  double err2 = 0.0, ref2 = 0.0, y0 = 0.0;
  std::size_t start = 0;
  for (std::size_t n = 0; n < x.samples.size(); ++n) {
    if (n > 0 && x.samples[n] != x.samples[n - 1]) {
      const double t = static_cast<double>(n - start) * x.dt();
      y0 = x.samples[n - 1] + (y0 - x.samples[n - 1]) * std::exp(-t / tau);
      start = n;
    }
    const double t = static_cast<double>(n - start) * x.dt();
    const double exact = x.samples[n] + (y0 - x.samples[n]) * std::exp(-t / tau);
    err2 += (y.samples[n] - exact) * (y.samples[n] - exact);
    ref2 += exact * exact;
  }
  const double rms = std::sqrt(err2 / ref2);
  c.expect(rms < 0.005, fmt::format("RC filter RMS error {:.3g}", rms));

  // Latch monotonicity and determinism over random timelines.
  std::mt19937_64 trng(99);
  int nondeterministic = 0, unlatched = 0;
  for (int i = 0; i < 100; ++i) {
    const Scenario s = fixtures::random_without_replug(trng);
    const SimReport a = run(s), b = run(s);
    bool latched = false;
    for (std::size_t k = 0; k < a.trace.size(); ++k) {
      const auto &ra = a.trace[k], &rb = b.trace[k];
      if (ra.v_evse != rb.v_evse || ra.v_ev != rb.v_ev || ra.soc != rb.soc ||
          ra.evse_state != rb.evse_state || ra.latched != rb.latched)
        ++nondeterministic;
      if (latched && !ra.latched) ++unlatched;
      latched = latched || ra.latched;
    }
  }
  c.expect(nondeterministic == 0, fmt::format("{} nondeterministic ticks", nondeterministic));
  c.expect(unlatched == 0, fmt::format("{} ticks left a latch without replug", unlatched));
}

}  // namespace

int main() {
  criterion("duty codec reference rows, clamp and digital band", 1.0, duty_codec);
  criterion("parallel ranges: closed form and 1 ohm sweep", 5.0, parallel_ranges);
  criterion("serial thresholds at lambda 2.8 V and 3.4 V", 1.0, serial_thresholds);
  criterion("automation circuit 12 V idle, 9 V -> 6 V", 1.0, automation);
  criterion("TLC555 and fake-load duty attacks at 1 MHz over 50 ms", 10.0, duty_attacks);
  criterion("scenario regressions: benign, forced charging, serial DoS", 6.0, scenarios);
  criterion("property suites: nodal oracle, codec round trip, RC filter, latches", 60.0,
            properties);
  fmt::print("{} criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
