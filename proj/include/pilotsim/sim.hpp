#pragma once

// Fixed-step co-simulation of EVSE, cable (with an optional attack) and EV
// over a scripted event timeline.

#include <optional>
#include <string>
#include <vector>

#include "pilotsim/attacks.hpp"
#include "pilotsim/state.hpp"

namespace pilotsim {

enum class EventKind {
  plug_in,
  unplug,
  ev_stop_charging,
  ev_start_charging,
  engage_attack,
  disengage_attack,
  set_r_att,
  replug
};

std::string to_string(EventKind k);
EventKind parse_event_kind(std::string_view text);

struct Event {
  double t = 0.0;
  EventKind kind = EventKind::plug_in;
  double value = 0.0;  // ohms, set_r_att only
};

struct Scenario {
  std::string name;
  ChargerProfile charger;
  EvProfile ev;
  std::optional<AttackSpec> attack;
  bool attack_engaged_at_start = false;
  std::vector<Event> timeline;
  double duration = 10.0;
  double tick = 0.01;
  // State disparity must persist this long to count as a link fault.
  double t_detect = 0.5;

  /// Throws std::invalid_argument describing the first problem found.
  void validate() const;
};

struct TraceRow {
  double t = 0.0;
  double v_evse = 0.0;
  double v_ev = 0.0;
  ChargingState evse_state = ChargingState::A;
  ChargingState ev_state = ChargingState::A;      // EV protocol state
  ChargingState ev_perceived = ChargingState::A;  // what the EV reads
  double advertised_amps = 0.0;
  double ev_duty = 100.0;
  double ev_decoded_amps = 0.0;
  double drawn_amps = 0.0;
  bool contactor_closed = false;
  bool attack_engaged = false;
  bool latched = false;
  double soc = 0.0;
};

struct SimFlags {
  bool dos_communication_error = false;
  bool low_pilot_voltage_error = false;
  bool unsolicited_energization = false;
  bool overcharge_past_limit = false;
  bool latched = false;
  bool duty_attack_failed = false;
};

struct SimReport {
  std::string scenario;
  double tick = 0.0;
  double supply_volts = 0.0;
  std::vector<TraceRow> trace;
  SimFlags flags;
  double delivered_energy_kwh = 0.0;
  double battery_energy_kwh = 0.0;
  double final_soc = 0.0;
  ChargingState final_evse_state = ChargingState::A;
  ChargingState final_ev_state = ChargingState::A;
};

/// Deterministic: identical scenarios give bit-identical reports. Each tick
/// applies due events, advances the EV, solves the pilot circuit, advances
/// the EVSE, then books current and energy.
SimReport run(const Scenario& s);

enum class Outcome { normal, dos, forced_charging, error_latched, rate_reduced };
std::string to_string(Outcome o);

struct OutcomeSummary {
  Outcome outcome = Outcome::normal;
  // Set for rate_reduced: advertised vs EV-decoded current.
  double advertised_amps = 0.0;
  double ev_amps = 0.0;
  std::string text;
};

/// Priority: dos, forced_charging, error_latched, rate_reduced, normal.
/// rate_reduced means the EV decoded more than 1 A below the advertisement.
OutcomeSummary classify_outcome(const SimReport& report);

}  // namespace pilotsim
