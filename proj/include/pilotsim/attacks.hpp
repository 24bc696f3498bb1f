#pragma once

// Behavioral models of the five pilot-line attack circuits.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pilotsim/circuit.hpp"
#include "pilotsim/state.hpp"
#include "pilotsim/waveform.hpp"

namespace pilotsim {

/// Resistor spliced into the pilot conductor with a bypass switch. A closed
/// switch shorts the resistor out.
struct SerialInsertionAttack {
  Resistance r_att{0.0};
  bool switch_closed = true;

  Resistance effective() const {
    return switch_closed ? Resistance(0.0) : r_att;
  }
};

/// Resistor + diode branch across the EV load, behind an open/close switch.
struct ParallelAttachmentAttack {
  Resistance r_att = Resistance::open();
  bool switch_closed = false;
  DiodeModel diode;

  Resistance branch() const {
    return switch_closed ? r_att : Resistance::open();
  }
};

/// Comparator-gated current sink. A divider feeds the comparator's inverting
/// input; when it falls below v_ref the sink pulls the pilot down by drop_v.
struct AutomationAttack {
  Resistance r4{107000.0};
  Resistance r5{13000.0};
  double v_ref = 1.2;
  double drop_v = 3.0;

  void validate() const;
  double divider_ratio() const;
};

/// Monostable one-shot re-timing the pilot seen by the EV: every rising
/// edge starts a pulse of 1.1 * R * C.
struct Tlc555Attack {
  Resistance r{1000.0};
  double c = 158.3e-9;
  // Added to the high level; the measured part ran ~0.2 V above its input.
  double level_offset = 0.0;

  void validate() const;
  double high_time() const { return 1.1 * r.ohms() * c; }
};

/// Fake-load duty attack. A slow RC ("State") gates the attack to state C;
/// a fast RC ("DT") ramps during each high pulse, and once it crosses v_ref
/// the EV is switched to v_ss while the EVSE is handed the fake load r_f.
struct FakeLoadAttack {
  double tau_state = 10e-3;
  double tau_dt = 0.1e-3;
  double v_ref = 1.2;
  Resistance r_f{666.7};
  double v_ss = -12.0;
  // Divider ratios ahead of the two comparators.
  double state_divider = 0.6;
  double dt_divider = 0.297;
  // Output slope on the EV side (RC-faithful mode only); 0 = ideal edges.
  double tau_edge = 0.0;

  void validate() const;
};

using AttackSpec = std::variant<SerialInsertionAttack, ParallelAttachmentAttack,
                                AutomationAttack, Tlc555Attack, FakeLoadAttack>;

std::string attack_kind(const AttackSpec& a);

PilotSolution apply_serial(const SerialInsertionAttack& att,
                           const PilotSource& src, Resistance r_v,
                           const DiodeModel& diode = {});

PilotSolution apply_parallel(const ParallelAttachmentAttack& att,
                             const PilotSource& src, Resistance r_v,
                             const DiodeModel& diode = {});

struct AutomationOutput {
  double v_out = 0.0;
  bool active = false;
};

AutomationOutput automation_output(const AutomationAttack& att,
                                   double v_pilot_high);

/// Baseline divider followed by the automation sink.
PilotSolution apply_automation(const AutomationAttack& att,
                               const PilotSource& src, Resistance r_v,
                               const DiodeModel& diode = {});

/// Parameter-level one-shot: same frequency, duty = 1.1*R*C*f. Throws
/// std::invalid_argument when the pulse would not fit inside one period or
/// the input is not a PWM (duty 0 or 100 %).
PwmParams tlc555_transform(const Tlc555Attack& att, const PwmParams& input);

/// Sample-level one-shot driven by the rising edges of `input`.
SampledSignal tlc555_apply(const Tlc555Attack& att, const SampledSignal& input);

enum class FakeLoadMode { rc_faithful, ideal_switch };

struct FakeLoadResult {
  SampledSignal ev_side;
  std::vector<Resistance> evse_load;  // per sample
  SampledSignal state_signal;         // after the divider
  SampledSignal dt_signal;            // after the divider
  double attack_fraction = 0.0;       // share of high samples diverted
  ChargingState evse_state_during_attack = ChargingState::C;
  bool attack_failed = false;
};

/// Runs the fake-load circuit against an EVSE-side pilot. `r_ev` is the
/// load the EVSE sees while the EV is connected. Leaving state C on the
/// EVSE side while the fake load is in is reported in the result, not
/// thrown.
FakeLoadResult fake_load_transform(const FakeLoadAttack& att,
                                   const SampledSignal& evse_signal,
                                   Resistance r_ev,
                                   const ChargerProfile& charger,
                                   FakeLoadMode mode = FakeLoadMode::rc_faithful);

/// Periodic-steady-state time after each rising edge at which the DT signal
/// crosses v_ref, for a rectified pulse train of height v_high. nullopt when
/// it never crosses; 0 when it never drops below.
std::optional<double> fake_load_crossing_time(const FakeLoadAttack& att,
                                              double v_high, DutyCycle duty,
                                              double freq);

/// DT divider that makes the EV-side duty equal `target`.
double fake_load_dt_divider_for(const FakeLoadAttack& att, double v_high,
                                DutyCycle input, DutyCycle target, double freq);

}  // namespace pilotsim
