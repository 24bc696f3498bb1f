#include "pilotsim/circuit.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace pilotsim {

double Resistance::siemens() const {
  if (open_) return 0.0;
  if (ohms_ == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / ohms_;
}

Resistance series(Resistance a, Resistance b) {
  if (a.is_open() || b.is_open()) return Resistance::open();
  return Resistance(a.ohms() + b.ohms());
}

Resistance parallel(Resistance a, Resistance b) {
  if (a.is_open()) return b;
  if (b.is_open()) return a;
  if (a.ohms() == 0.0 || b.ohms() == 0.0) return Resistance(0.0);
  return Resistance(1.0 / (1.0 / a.ohms() + 1.0 / b.ohms()));
}

std::string to_string(Resistance r) {
  if (r.is_open()) return "open";
  return fmt::format("{:.6g} ohm", r.ohms());
}

void DiodeModel::validate() const {
  if (!(forward_drop >= 0.0 && forward_drop < 1.0))
    throw std::invalid_argument("diode forward drop must be in [0, 1) V");
}

void PilotSource::validate() const {
  if (!(v_high > 0.0 && v_low < 0.0))
    throw std::invalid_argument("pilot source needs v_high > 0 > v_low");
  if (r1.is_open() || r1.ohms() <= 0.0)
    throw std::invalid_argument("R1 must be a finite positive resistance");
}

namespace {

// One loop: v_high -> R1 -> upstream -> diode -> downstream -> gnd. Returns
// the loop current, zero when the diode cannot conduct.
double loop_current(const PilotSource& src, Resistance upstream,
                    Resistance downstream, const DiodeModel& diode) {
  Resistance total = series(series(src.r1, upstream), downstream);
  if (total.is_open()) return 0.0;
  double drive = src.v_high - diode.forward_drop;
  if (drive <= 0.0) return 0.0;
  return drive / total.ohms();
}

}  // namespace

PilotSolution solve_baseline(const PilotSource& src, Resistance r_v,
                             const DiodeModel& diode) {
  return solve_serial(src, Resistance(0.0), r_v, diode);
}

PilotSolution solve_serial(const PilotSource& src, Resistance r_att,
                           Resistance r_v, const DiodeModel& diode) {
  src.validate();
  diode.validate();
  double i = loop_current(src, r_att, r_v, diode);
  PilotSolution s;
  s.v_evse = src.v_high - src.r1.ohms() * i;
  // An open attack resistor carries no current; the floating inlet is
  // reported at the EVSE level.
  s.v_diff = r_att.is_open() ? 0.0 : r_att.ohms() * i;
  s.v_ev = s.v_evse - s.v_diff;
  return s;
}

Resistance combine_parallel(Resistance r_v, Resistance r_att) {
  return parallel(r_v, r_att);
}

PilotSolution solve_parallel(const PilotSource& src, Resistance r_att,
                             Resistance r_v, const DiodeModel& diode,
                             std::optional<DiodeModel> attack_diode) {
  const DiodeModel branch_diode = attack_diode.value_or(diode);
  if (branch_diode.forward_drop == diode.forward_drop) {
    PilotSolution s = solve_baseline(src, combine_parallel(r_v, r_att), diode);
    s.v_ev = s.v_evse;
    s.v_diff = 0.0;
    return s;
  }
  src.validate();
  diode.validate();
  branch_diode.validate();

  // Two diode branches with different drops. The node sits at the nodal
  // balance of the resistive branches that conduct, clamped down to the
  // drop of any shorted branch; branches left reverse biased drop out.
  struct Branch {
    Resistance r;
    double drop;
    bool on;
  };
  Branch branches[2] = {{r_v, diode.forward_drop, !r_v.is_open()},
                        {r_att, branch_diode.forward_drop, !r_att.is_open()}};
  double v = src.v_high;
  for (int pass = 0; pass < 3; ++pass) {
    double g_sum = src.r1.siemens();
    double i_sum = src.v_high * src.r1.siemens();
    double clamp = src.v_high;
    for (const Branch& b : branches) {
      if (!b.on) continue;
      if (b.r.ohms() == 0.0) {
        clamp = std::min(clamp, b.drop);
        continue;
      }
      g_sum += b.r.siemens();
      i_sum += b.drop * b.r.siemens();
    }
    v = std::min(clamp, i_sum / g_sum);
    bool changed = false;
    for (Branch& b : branches) {
      if (b.on && v < b.drop) {
        b.on = false;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return PilotSolution{v, v, 0.0};
}

Resistance load_for_voltage(const PilotSource& src, double v_target) {
  src.validate();
  if (v_target >= src.v_high) return Resistance::open();
  if (v_target <= 0.0) return Resistance(0.0);
  return Resistance(src.r1.ohms() * v_target / (src.v_high - v_target));
}

}  // namespace pilotsim
