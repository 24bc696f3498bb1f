#include "pilotsim/analysis.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

namespace pilotsim {

std::string to_string(AttackKind k) {
  return k == AttackKind::serial ? "serial" : "parallel";
}

std::string to_string(Goal g) {
  switch (g) {
    case Goal::b_to_c: return "B->C";
    case Goal::c_to_f: return "C->F";
    case Goal::b_to_f: return "B->F";
    case Goal::a_b_c: return "A<-B->C";
    case Goal::b_c_f: return "B<-C->F";
  }
  return "?";
}

AttackKind parse_attack_kind(std::string_view text) {
  if (text == "serial") return AttackKind::serial;
  if (text == "parallel") return AttackKind::parallel;
  throw std::invalid_argument(fmt::format("unknown attack kind '{}'", text));
}

Goal parse_goal(std::string_view text) {
  std::string letters;
  for (char c : text)
    if (c >= 'A' && c <= 'F') letters.push_back(c);
  if (letters == "BC") return Goal::b_to_c;
  if (letters == "CF") return Goal::c_to_f;
  if (letters == "BF") return Goal::b_to_f;
  if (letters == "ABC") return Goal::a_b_c;
  if (letters == "BCF") return Goal::b_c_f;
  throw std::invalid_argument(fmt::format("unknown goal '{}'", text));
}

bool FeasibilityRange::contains(double ohms) const {
  if (empty) return false;
  if (r_min && ohms < r_min->ohms()) return false;
  if (r_max && !r_max->is_open() && ohms > r_max->ohms()) return false;
  return true;
}

namespace {

// Parallel branch that brings r_v down to `target`; open when r_v already
// sits at or below it.
Resistance branch_for_load(Resistance target, Resistance r_v) {
  if (target.is_open() || r_v.ohms() <= target.ohms()) return Resistance::open();
  if (target.ohms() == 0.0) return Resistance(0.0);
  return Resistance(1.0 / (1.0 / target.ohms() - 1.0 / r_v.ohms()));
}

double floor_voltage(const ChargerProfile& charger, const EvProfile& ev) {
  return charger.v_cf.value_or(ev.v_low_pilot_error);
}

FeasibilityRange empty_range(AttackKind kind, Goal goal, std::string notes) {
  FeasibilityRange r;
  r.kind = kind;
  r.goal = goal;
  r.empty = true;
  r.notes = std::move(notes);
  return r;
}

Resistance nonnegative(double ohms) { return Resistance(std::max(0.0, ohms)); }

}  // namespace

FeasibilityRange parallel_range(Goal goal, const ChargerProfile& charger,
                                const EvProfile& ev) {
  charger.validate();
  ev.validate();
  const PilotSource& src = charger.source;
  FeasibilityRange out;
  out.kind = AttackKind::parallel;
  out.goal = goal;

  switch (goal) {
    case Goal::b_to_c: {
      const double v_floor = floor_voltage(charger, ev);
      const Resistance floor_load = load_for_voltage(src, v_floor);
      out.r_max = branch_for_load(load_for_voltage(src, charger.v_bc), ev.r_state_b);
      const Resistance pre = branch_for_load(floor_load, ev.r_state_b);
      const Resistance post = branch_for_load(floor_load, ev.r_state_c);
      out.r_min = Resistance(std::max(pre.ohms(), post.ohms()));
      out.notes = fmt::format(
          "upper: V <= V_B/C = {} V with the {} state-B load; lower: V > {} V "
          "after the EV switches to its {} state-C load",
          charger.v_bc, to_string(ev.r_state_b), v_floor,
          to_string(ev.r_state_c));
      if (!charger.v_cf)
        out.notes += " (floor from the EV low-pilot threshold; charger has no F)";
      if (out.r_max->is_open() || out.r_min->ohms() >= out.r_max->ohms())
        out.empty = true;
      return out;
    }
    case Goal::c_to_f:
    case Goal::b_to_f: {
      if (!charger.has_state_f || !charger.v_cf)
        return empty_range(AttackKind::parallel, goal,
                           charger.name + " has no state F");
      const Resistance r_v =
          goal == Goal::c_to_f ? ev.r_state_c : ev.r_state_b;
      out.r_max = branch_for_load(load_for_voltage(src, *charger.v_cf), r_v);
      out.notes = fmt::format("V <= V_C/F = {} V with the {} load",
                              *charger.v_cf, to_string(r_v));
      return out;
    }
    default:
      throw std::invalid_argument(to_string(goal) +
                                  " is not a parallel-attachment goal");
  }
}

SerialThresholds serial_range(Goal goal, const ChargerProfile& charger,
                              const EvProfile& ev) {
  charger.validate();
  ev.validate();
  const double vh = charger.source.v_high;
  const double r1 = charger.source.r1.ohms();

  double upper = 0.0, lower = 0.0;
  Resistance r_v;
  std::optional<double> lambda_override;
  switch (goal) {
    case Goal::a_b_c:
      upper = charger.v_ab;
      lower = charger.v_bc;
      r_v = ev.r_state_b;
      lambda_override = charger.lambda_b;
      break;
    case Goal::b_c_f:
      upper = charger.v_bc;
      lower = floor_voltage(charger, ev);
      r_v = ev.r_state_c;
      lambda_override = charger.lambda_c;
      break;
    default:
      throw std::invalid_argument(to_string(goal) +
                                  " is not a serial-insertion goal");
  }

  SerialThresholds t;
  t.goal = goal;
  t.lambda = lambda_override.value_or(upper - lower);
  const double rv = r_v.ohms();
  t.ev_crossing = nonnegative(vh * rv / lower - r1 - rv);
  t.evse_crossing = nonnegative(r1 * vh / (vh - upper) - r1 - rv);
  t.guaranteed = nonnegative(t.lambda * (r1 + rv) / (vh - t.lambda));

  t.range.kind = AttackKind::serial;
  t.range.goal = goal;
  t.range.r_min = t.guaranteed;
  t.range.notes = fmt::format(
      "V_diff >= lambda = {:.4g} V with the {} load; EV crosses {} V at {}, "
      "EVSE crosses {} V at {}",
      t.lambda, to_string(r_v), lower, to_string(t.ev_crossing), upper,
      to_string(t.evse_crossing));
  return t;
}

FeasibilityRange fake_load_rf_range(const ChargerProfile& charger) {
  charger.validate();
  FeasibilityRange r;
  r.kind = AttackKind::parallel;
  r.goal = Goal::b_to_c;
  const double lower_v = charger.v_cf.value_or(charger.v_e_band);
  r.r_min = load_for_voltage(charger.source, lower_v);
  r.r_max = load_for_voltage(charger.source, charger.v_bc);
  r.notes = fmt::format("EVSE stays in C for {} V < V <= {} V (lower bound "
                        "exclusive)",
                        lower_v, charger.v_bc);
  return r;
}

std::string to_string(SweepOutcome o) {
  switch (o) {
    case SweepOutcome::none: return "none";
    case SweepOutcome::state_switch: return "state_switch";
    case SweepOutcome::disparity: return "disparity";
    case SweepOutcome::error_f: return "error_F";
  }
  return "?";
}

namespace {

SweepRow sweep_point(AttackKind kind, double r, const ChargerProfile& charger,
                     const EvProfile& ev, ChargingState initial,
                     Resistance r_v) {
  const Resistance r_att(r);
  const PilotSolution s =
      kind == AttackKind::serial
          ? solve_serial(charger.source, r_att, r_v, ev.diode)
          : solve_parallel(charger.source, r_att, r_v, ev.diode);
  SweepRow row;
  row.r_att = r;
  row.v_evse = s.v_evse;
  row.v_ev = s.v_ev;
  row.evse_state = classify_state(s.v_evse, charger);
  row.ev_state = classify_ev_side(s.v_ev, charger, ev);
  if (row.evse_state == ChargingState::F || row.ev_state == ChargingState::F)
    row.outcome = SweepOutcome::error_f;
  else if (row.evse_state != row.ev_state)
    row.outcome = SweepOutcome::disparity;
  else if (row.evse_state != initial)
    row.outcome = SweepOutcome::state_switch;
  return row;
}

void check_grid(std::span<const double> grid) {
  if (!std::is_sorted(grid.begin(), grid.end()))
    throw std::invalid_argument("sweep grid must be sorted ascending");
}

}  // namespace

std::vector<SweepRow> sweep(AttackKind kind, std::span<const double> r_grid,
                            const ChargerProfile& charger, const EvProfile& ev,
                            ChargingState initial_state) {
  check_grid(r_grid);
  const Resistance r_v = ev_load_for_state(initial_state, ev);
  std::vector<SweepRow> rows(r_grid.size());
  const auto n = static_cast<long long>(r_grid.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i)
    rows[i] = sweep_point(kind, r_grid[i], charger, ev, initial_state, r_v);
  return rows;
}

namespace serial {

std::vector<SweepRow> sweep(AttackKind kind, std::span<const double> r_grid,
                            const ChargerProfile& charger, const EvProfile& ev,
                            ChargingState initial_state) {
  check_grid(r_grid);
  const Resistance r_v = ev_load_for_state(initial_state, ev);
  std::vector<SweepRow> rows;
  rows.reserve(r_grid.size());
  for (double r : r_grid)
    rows.push_back(sweep_point(kind, r, charger, ev, initial_state, r_v));
  return rows;
}

}  // namespace serial

std::vector<double> linear_grid(double r_min, double r_max, std::size_t steps) {
  if (r_min > r_max) throw std::invalid_argument("r_min must not exceed r_max");
  std::vector<double> g(steps);
  if (steps == 1) g[0] = r_min;
  for (std::size_t i = 0; steps > 1 && i < steps; ++i)
    g[i] = r_min + (r_max - r_min) * static_cast<double>(i) /
                       static_cast<double>(steps - 1);
  return g;
}

}  // namespace pilotsim
