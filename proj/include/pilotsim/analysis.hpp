#pragma once

// Attack-feasibility ranges for R_att, closed form and by brute-force sweep.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pilotsim/circuit.hpp"
#include "pilotsim/state.hpp"

namespace pilotsim {

enum class AttackKind { serial, parallel };

/// Switching goals. Parallel goals move both sides together; serial goals
/// name the EVSE-side and EV-side moves (EVSE <- start -> EV).
enum class Goal { b_to_c, c_to_f, b_to_f, a_b_c, b_c_f };

std::string to_string(AttackKind k);
std::string to_string(Goal g);
AttackKind parse_attack_kind(std::string_view text);
/// Accepts "B->C", "C->F", "B->F", "A<-B->C", "B<-C->F" (and "BC", "CF",
/// "BF", "ABC", "BCF").
Goal parse_goal(std::string_view text);

struct FeasibilityRange {
  AttackKind kind = AttackKind::parallel;
  Goal goal = Goal::b_to_c;
  std::optional<Resistance> r_min;  // none: unbounded below (0)
  std::optional<Resistance> r_max;  // none: unbounded above
  bool empty = false;
  std::string notes;

  bool contains(double ohms) const;
};

/// Inverts the parallel divider against the boundary voltages. For B->C
/// the lower bound also holds after the EV switches to its state-C load,
/// so the pilot never drops into F. Chargers without C/F fall back to the
/// EV's own low-pilot-voltage threshold for that floor; C->F and B->F on
/// such chargers are empty.
FeasibilityRange parallel_range(Goal goal, const ChargerProfile& charger,
                                const EvProfile& ev);

struct SerialThresholds {
  Goal goal = Goal::a_b_c;
  double lambda = 0.0;
  // EV side drops through its lower boundary.
  Resistance ev_crossing;
  // EVSE side rises through its upper boundary.
  Resistance evse_crossing;
  // Smallest R_att whose V_diff reaches lambda.
  Resistance guaranteed;
  FeasibilityRange range;  // [guaranteed, unbounded)
};

SerialThresholds serial_range(Goal goal, const ChargerProfile& charger,
                              const EvProfile& ev);

/// Fake-load resistances that keep the EVSE side in state C.
FeasibilityRange fake_load_rf_range(const ChargerProfile& charger);

enum class SweepOutcome { none, state_switch, disparity, error_f };
std::string to_string(SweepOutcome o);

struct SweepRow {
  double r_att = 0.0;
  double v_evse = 0.0;
  double v_ev = 0.0;
  ChargingState evse_state = ChargingState::A;
  ChargingState ev_state = ChargingState::A;
  SweepOutcome outcome = SweepOutcome::none;
};

/// One row per grid point with the EV presenting its load for
/// `initial_state`. Throws std::invalid_argument on an unsorted grid.
std::vector<SweepRow> sweep(AttackKind kind, std::span<const double> r_grid,
                            const ChargerProfile& charger, const EvProfile& ev,
                            ChargingState initial_state = ChargingState::B);

/// `steps` points evenly spaced over [r_min, r_max] inclusive.
std::vector<double> linear_grid(double r_min, double r_max, std::size_t steps);

namespace serial {
std::vector<SweepRow> sweep(AttackKind kind, std::span<const double> r_grid,
                            const ChargerProfile& charger, const EvProfile& ev,
                            ChargingState initial_state = ChargingState::B);
}  // namespace serial

}  // namespace pilotsim
