#include "pilotsim/state.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace pilotsim {

namespace {
// Accumulated tick sums drift below exact multiples (20 * 0.01 < 0.2).
constexpr double kTimeEps = 1e-9;

bool reached(double elapsed, double window) {
  return elapsed + kTimeEps >= window;
}
}  // namespace

char to_char(ChargingState s) { return "ABCDEF"[static_cast<int>(s)]; }

ChargingState parse_state(std::string_view text) {
  if (text.size() == 1 && text[0] >= 'A' && text[0] <= 'F')
    return static_cast<ChargingState>(text[0] - 'A');
  throw std::invalid_argument(fmt::format("unknown charging state '{}'", text));
}

int voltage_rank(ChargingState s) {
  switch (s) {
    case ChargingState::A: return 5;
    case ChargingState::B: return 4;
    case ChargingState::C: return 3;
    case ChargingState::D: return 2;
    case ChargingState::E: return 1;
    case ChargingState::F: return 0;
  }
  return 0;
}

void ChargerProfile::validate() const {
  source.validate();
  if (!(v_ab > v_bc))
    throw std::invalid_argument(name + ": need v_ab > v_bc");
  if (v_cf && !(v_bc > *v_cf))
    throw std::invalid_argument(name + ": need v_bc > v_cf");
  if (v_cf && !has_state_f)
    throw std::invalid_argument(name + ": v_cf given without state F");
  if (v_cd && !(v_bc > *v_cd))
    throw std::invalid_argument(name + ": need v_bc > v_cd");
  if (v_de && (!v_cd || !(*v_cd > *v_de)))
    throw std::invalid_argument(name + ": need v_cd > v_de");
  if (!(max_amps > 0.0 && max_amps <= kMaxAmps))
    throw std::invalid_argument(name + ": max_amps must be in (0, 80]");
  if (!(supply_volts > 0.0 && pwm_freq > 0.0 && v_e_band >= 0.0))
    throw std::invalid_argument(name + ": bad supply/pwm/E-band values");
  advertised_duty();  // rejects currents without an encoding
}

DutyCycle ChargerProfile::advertised_duty() const {
  return current_to_duty(max_amps);
}

void EvProfile::validate() const {
  auto finite = [](Resistance r) { return !r.is_open() && r.ohms() > 0.0; };
  if (!(finite(r_state_b) && finite(r_state_c) && finite(r_state_d)))
    throw std::invalid_argument(name + ": state resistors must be finite > 0");
  if (!(r_state_b.ohms() > r_state_c.ohms() &&
        r_state_c.ohms() > r_state_d.ohms()))
    throw std::invalid_argument(name + ": need r_b > r_c > r_d");
  diode.validate();
  if (!(charge_limit_fraction > 0.0 && charge_limit_fraction <= 1.0))
    throw std::invalid_argument(name + ": charge limit must be in (0, 1]");
  if (!(initial_soc >= 0.0 && initial_soc <= 1.0))
    throw std::invalid_argument(name + ": initial SoC must be in [0, 1]");
  if (!(expected_band_tolerance > 0.0 && battery_capacity_kwh > 0.0 &&
        max_amps > 0.0 && handshake_delay >= 0.0 && debounce >= 0.0 &&
        parasitic_amps >= 0.0))
    throw std::invalid_argument(name + ": nonpositive EV parameter");
}

ChargingState classify_state(double v_high, const ChargerProfile& p) {
  if (v_high > p.v_ab) return ChargingState::A;
  if (v_high > p.v_bc) return ChargingState::B;
  if (v_high < -p.v_e_band)
    return p.has_state_f ? ChargingState::F : ChargingState::E;
  if (v_high <= p.v_e_band) return ChargingState::E;
  if (p.v_cd) {
    if (v_high > *p.v_cd) return ChargingState::C;
    if (p.v_de && v_high > *p.v_de) return ChargingState::D;
    return ChargingState::E;
  }
  if (p.v_cf) return v_high > *p.v_cf ? ChargingState::C : ChargingState::F;
  return ChargingState::C;
}

ChargingState classify_ev_side(double v_high, const ChargerProfile& charger,
                               const EvProfile& ev) {
  ChargingState s = classify_state(v_high, charger);
  if (v_high > charger.v_e_band && v_high <= ev.v_low_pilot_error)
    return ChargingState::F;
  return s;
}

Resistance ev_load_for_state(ChargingState s, const EvProfile& p) {
  switch (s) {
    case ChargingState::B: return p.r_state_b;
    case ChargingState::C: return p.r_state_c;
    case ChargingState::D: return p.r_state_d;
    default: return Resistance::open();
  }
}

EvseStatus evse_reset() { return EvseStatus{}; }

EvseStatus evse_step(const EvseStatus& status, double measured_v_high,
                     const ChargerProfile& profile, double dt) {
  EvseStatus next = status;
  next.time_in_state += dt;
  if (status.latched_error) return next;

  ChargingState s = classify_state(measured_v_high, profile);
  if (s != status.state) next.time_in_state = 0.0;
  next.state = s;
  switch (s) {
    case ChargingState::A:
      next.pwm_active = false;
      next.advertised_duty = DutyCycle(100.0);
      next.contactor_closed = false;
      break;
    case ChargingState::B:
    case ChargingState::D:
      next.pwm_active = true;
      next.advertised_duty = profile.advertised_duty();
      next.contactor_closed = false;
      break;
    case ChargingState::C:
      next.pwm_active = true;
      next.advertised_duty = profile.advertised_duty();
      next.contactor_closed = true;
      break;
    case ChargingState::E:
    case ChargingState::F:
      next.pwm_active = false;
      next.advertised_duty = DutyCycle(100.0);
      next.contactor_closed = false;
      next.latched_error = profile.latch_errors;
      break;
  }
  return next;
}

EvStatus ev_unplugged() { return EvStatus{}; }

EvStatus ev_plugged(const EvProfile& profile) {
  EvStatus s;
  s.plugged = true;
  s.state = ChargingState::B;
  s.presented_load = profile.r_state_b;
  return s;
}

double ev_expected_voltage(Resistance presented_load, const EvProfile& profile) {
  return solve_baseline(PilotSource{}, presented_load, profile.diode).v_ev;
}

EvStatus ev_step(const EvStatus& status, const EvInput& in,
                 const EvProfile& profile, EvCommand command, double dt) {
  switch (command) {
    case EvCommand::unplug: return ev_unplugged();
    case EvCommand::replug: return ev_plugged(profile);
    case EvCommand::plug_in:
      if (!status.plugged) return ev_plugged(profile);
      break;
    default: break;
  }
  if (!status.plugged || status.latched_error) return status;

  EvStatus next = status;

  // Fault detection against the load presented during the last interval.
  const bool low = in.v_high <= profile.v_low_pilot_error;
  const bool off_band =
      std::abs(in.v_high - ev_expected_voltage(status.presented_load, profile)) >
      profile.expected_band_tolerance;
  next.low_voltage_elapsed = low ? status.low_voltage_elapsed + dt : 0.0;
  next.band_elapsed = off_band ? status.band_elapsed + dt : 0.0;

  LatchCause cause = LatchCause::none;
  if (low && reached(next.low_voltage_elapsed, profile.debounce))
    cause = LatchCause::low_pilot_voltage;
  else if (in.link_fault ||
           (off_band && reached(next.band_elapsed, profile.debounce)))
    cause = LatchCause::communication;

  if (cause != LatchCause::none) {
    next.state = ChargingState::F;
    next.cause = cause;
    next.charging = false;
    next.handshake_elapsed = 0.0;
    if (profile.error_latch) {
      next.latched_error = true;
      next.charge_requested = false;
      next.presented_load = Resistance::open();
      return next;
    }
    // A non-latching load keeps its resistor and recovers once the fault
    // clears.
    next.presented_load = profile.r_state_b;
    return next;
  }
  next.cause = LatchCause::none;

  if (command == EvCommand::start_charging) next.charge_requested = true;
  if (command == EvCommand::stop_charging) {
    next.charge_requested = false;
    next.charging = false;
    next.handshake_elapsed = 0.0;
  }

  const bool valid_pwm = in.pwm_present && duty_to_current(in.duty).has_amps();
  if (next.charging && !valid_pwm) {
    next.charging = false;
    next.handshake_elapsed = 0.0;
  }
  if (next.charge_requested && !next.charging) {
    if (valid_pwm) {
      next.handshake_elapsed += dt;
      if (reached(next.handshake_elapsed, profile.handshake_delay))
        next.charging = true;
    } else {
      next.handshake_elapsed = 0.0;
    }
  }

  next.state = next.charging ? ChargingState::C : ChargingState::B;
  next.presented_load = next.charging ? profile.r_state_c : profile.r_state_b;
  return next;
}

bool detect_disparity(ChargingState evse_state, ChargingState ev_state,
                      double hold_time, double t_detect) {
  return evse_state != ev_state && reached(hold_time, t_detect);
}

ChargerProfile charger1_profile() {
  ChargerProfile p;
  p.name = "charger1";
  p.max_amps = 12.0;
  p.supply_volts = 120.0;
  return p;
}

ChargerProfile charger2_profile() {
  ChargerProfile p;
  p.name = "charger2";
  p.v_cf = 4.4;
  p.has_state_f = true;
  p.max_amps = 32.0;
  p.supply_volts = 240.0;
  return p;
}

ChargerProfile public_charger_profile() {
  ChargerProfile p;
  p.name = "public_charger";
  p.max_amps = 30.0;
  p.supply_volts = 211.0;
  return p;
}

ChargerProfile nominal_j1772_profile() {
  ChargerProfile p;
  p.name = "nominal_j1772";
  p.v_ab = 10.5;
  p.v_bc = 7.5;
  p.v_cd = 4.5;
  p.v_de = 1.5;
  p.has_state_f = true;
  p.max_amps = 32.0;
  p.supply_volts = 240.0;
  return p;
}

EvProfile tesla_model3_profile() {
  EvProfile p;
  p.name = "tesla_model3";
  return p;
}

EvProfile lab_load_profile() {
  EvProfile p;
  p.name = "lab_load";
  p.error_latch = false;
  p.expected_band_tolerance = 12.0;
  p.v_low_pilot_error = 0.0;
  return p;
}

std::vector<ChargerProfile> builtin_chargers() {
  return {charger1_profile(), charger2_profile(), public_charger_profile(),
          nominal_j1772_profile()};
}

std::vector<EvProfile> builtin_evs() {
  return {tesla_model3_profile(), lab_load_profile()};
}

}  // namespace pilotsim
