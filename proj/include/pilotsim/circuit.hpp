#pragma once

// Steady-state solver for the positive half-cycle of the control-pilot line.
//
// Topology (high half of the PWM, all values in volts / ohms):
//
//   v_high --[R1]--+--(cable / attack)--+--|>|--[R_v]-- gnd
//              v_evse                 v_ev
//
// The EV diode blocks the negative half, so only the high plateau is solved
// here. RC behaviour lives in waveform.hpp.

#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace pilotsim {

/// Nonnegative resistance with an explicit "open" value for a disconnected
/// branch. Open is the identity of parallel combination and absorbs series
/// combination.
class Resistance {
 public:
  constexpr Resistance() = default;
  explicit Resistance(double ohms) : ohms_(ohms) {
    if (!(ohms >= 0.0) || ohms == std::numeric_limits<double>::infinity())
      throw std::invalid_argument("resistance must be finite and >= 0 ohm");
  }

  static constexpr Resistance open() {
    Resistance r;
    r.open_ = true;
    return r;
  }

  constexpr bool is_open() const { return open_; }
  /// Finite value in ohms; infinity for an open branch.
  constexpr double ohms() const {
    return open_ ? std::numeric_limits<double>::infinity() : ohms_;
  }
  /// Conductance in siemens; 0 for open, infinity for a short.
  double siemens() const;

  friend bool operator==(const Resistance&, const Resistance&) = default;

 private:
  double ohms_ = 0.0;
  bool open_ = false;
};

Resistance series(Resistance a, Resistance b);
Resistance parallel(Resistance a, Resistance b);

std::string to_string(Resistance r);

struct DiodeModel {
  double forward_drop = 0.0;  // volts, 0 = ideal
  bool blocks_negative = true;

  void validate() const;
};

struct PilotSource {
  double v_high = 12.0;
  double v_low = -12.0;
  Resistance r1{1000.0};

  void validate() const;
};

struct PilotSolution {
  double v_evse = 0.0;
  double v_ev = 0.0;
  double v_diff = 0.0;  // v_evse - v_ev
};

/// No attack: EVSE and EV see the same divider voltage.
PilotSolution solve_baseline(const PilotSource& src, Resistance r_v,
                             const DiodeModel& diode = {});

/// Attack resistor in series between the cable and the EV inlet.
PilotSolution solve_serial(const PilotSource& src, Resistance r_att,
                           Resistance r_v, const DiodeModel& diode = {});

/// Harmonic combination of the EV load and a parallel attack branch.
Resistance combine_parallel(Resistance r_v, Resistance r_att);

/// Diode-isolated attack branch in parallel with the EV load. The attack
/// branch uses `diode` too unless its own model is given.
PilotSolution solve_parallel(const PilotSource& src, Resistance r_att,
                             Resistance r_v, const DiodeModel& diode = {},
                             std::optional<DiodeModel> attack_diode = {});

/// Load resistance that puts the shared pilot node at `v_target` with an
/// ideal diode. Open when v_target >= src.v_high, zero when v_target <= 0.
Resistance load_for_voltage(const PilotSource& src, double v_target);

}  // namespace pilotsim
