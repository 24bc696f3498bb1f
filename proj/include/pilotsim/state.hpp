#pragma once

// Charging-state classification and the EVSE / EV protocol machines.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pilotsim/circuit.hpp"
#include "pilotsim/duty_codec.hpp"

namespace pilotsim {

enum class ChargingState { A, B, C, D, E, F };

char to_char(ChargingState s);
ChargingState parse_state(std::string_view text);

/// Position in the nominal high-voltage order A(12) > B(9) > C(6) > D(3) >
/// E(0), with F (error) ranked lowest.
int voltage_rank(ChargingState s);

struct ChargerProfile {
  std::string name;
  PilotSource source;
  double v_ab = 10.6;
  double v_bc = 7.8;
  // C/D and D/E boundaries; only the nominal J1772 profile defines them.
  std::optional<double> v_cd;
  std::optional<double> v_de;
  std::optional<double> v_cf;
  bool has_state_f = false;
  // |v| at or below this is a steady 0 V pilot (state E).
  double v_e_band = 0.5;
  double max_amps = 32.0;
  double supply_volts = 240.0;
  double pwm_freq = 1000.0;
  bool latch_errors = false;
  // Per-state tolerance override for the serial guaranteed-disparity bound.
  std::optional<double> lambda_b;
  std::optional<double> lambda_c;

  void validate() const;
  /// Duty the EVSE advertises in B and C.
  DutyCycle advertised_duty() const;
};

struct EvProfile {
  std::string name;
  Resistance r_state_b{2740.0};
  Resistance r_state_c{882.0};
  Resistance r_state_d{246.0};
  DiodeModel diode;
  bool error_latch = true;
  // Allowed |perceived - expected| before the EV flags a communication error.
  double expected_band_tolerance = 2.5;
  // Pilot high below this (and above the E band) is a low-pilot-voltage error.
  double v_low_pilot_error = 4.4;
  double battery_capacity_kwh = 75.0;
  double charge_limit_fraction = 0.9;
  double initial_soc = 0.5;
  double max_amps = 48.0;
  double handshake_delay = 0.5;
  double debounce = 0.2;
  // Current sunk while the EVSE is energized but the EV is not charging.
  double parasitic_amps = 6.0;
  // Where the parasitic current ends up: battery (true) or other loads.
  bool forced_energy_to_battery = false;

  void validate() const;
};

ChargingState classify_state(double v_high, const ChargerProfile& profile);

/// Classification as the EV sees it: charger boundaries, plus the EV's own
/// low-pilot-voltage threshold mapping to F.
ChargingState classify_ev_side(double v_high, const ChargerProfile& charger,
                               const EvProfile& ev);

/// A -> open, B/C/D -> the EV's state resistor; E/F present no load.
Resistance ev_load_for_state(ChargingState s, const EvProfile& profile);

struct EvseStatus {
  ChargingState state = ChargingState::A;
  bool latched_error = false;
  bool pwm_active = false;
  DutyCycle advertised_duty{100.0};
  bool contactor_closed = false;
  double time_in_state = 0.0;
};

EvseStatus evse_step(const EvseStatus& status, double measured_v_high,
                     const ChargerProfile& profile, double dt);

/// Clears any EVSE latch; used on unplug / replug.
EvseStatus evse_reset();

enum class LatchCause { none, low_pilot_voltage, communication };

struct EvStatus {
  ChargingState state = ChargingState::A;
  bool plugged = false;
  bool latched_error = false;
  LatchCause cause = LatchCause::none;
  Resistance presented_load = Resistance::open();
  bool charge_requested = false;
  bool charging = false;
  double handshake_elapsed = 0.0;
  double low_voltage_elapsed = 0.0;
  double band_elapsed = 0.0;
};

struct EvInput {
  double v_high = 12.0;
  DutyCycle duty{100.0};
  bool pwm_present = false;
  // Link-level disagreement already confirmed by the caller.
  bool link_fault = false;
};

enum class EvCommand { none, start_charging, stop_charging, plug_in, unplug,
                       replug };

EvStatus ev_plugged(const EvProfile& profile);
EvStatus ev_unplugged();

/// Advances the EV by dt. Error checks run against the load presented on
/// entry, before any load switch made in this step. A latched EV ignores
/// everything except unplug / replug.
EvStatus ev_step(const EvStatus& status, const EvInput& perceived,
                 const EvProfile& profile, EvCommand command, double dt);

/// Voltage the EV expects for the load it presents, assuming a nominal
/// 12 V / 1 kOhm source.
double ev_expected_voltage(Resistance presented_load, const EvProfile& profile);

bool detect_disparity(ChargingState evse_state, ChargingState ev_state,
                      double hold_time, double t_detect);

// Bundled device profiles.
ChargerProfile charger1_profile();
ChargerProfile charger2_profile();
ChargerProfile public_charger_profile();
ChargerProfile nominal_j1772_profile();
EvProfile tesla_model3_profile();
EvProfile lab_load_profile();

std::vector<ChargerProfile> builtin_chargers();
std::vector<EvProfile> builtin_evs();

}  // namespace pilotsim
