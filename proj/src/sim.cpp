#include "pilotsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>

#include <fmt/format.h>

#include "pilotsim/waveform.hpp"

namespace pilotsim {

namespace {
constexpr double kTimeEps = 1e-9;
constexpr double kJoulesPerKwh = 3.6e6;
// Waveform window used to evaluate duty-cycle attacks.
constexpr double kDutyWindowPeriods = 20.0;
constexpr double kDutySamplesPerPeriod = 1000.0;
}  // namespace

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::plug_in: return "plug_in";
    case EventKind::unplug: return "unplug";
    case EventKind::ev_stop_charging: return "ev_stop_charging";
    case EventKind::ev_start_charging: return "ev_start_charging";
    case EventKind::engage_attack: return "engage_attack";
    case EventKind::disengage_attack: return "disengage_attack";
    case EventKind::set_r_att: return "set_r_att";
    case EventKind::replug: return "replug";
  }
  return "?";
}

EventKind parse_event_kind(std::string_view text) {
  for (EventKind k :
       {EventKind::plug_in, EventKind::unplug, EventKind::ev_stop_charging,
        EventKind::ev_start_charging, EventKind::engage_attack,
        EventKind::disengage_attack, EventKind::set_r_att, EventKind::replug})
    if (to_string(k) == text) return k;
  throw std::invalid_argument(fmt::format("unknown event kind '{}'", text));
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::normal: return "normal";
    case Outcome::dos: return "dos";
    case Outcome::forced_charging: return "forced_charging";
    case Outcome::error_latched: return "error_latched";
    case Outcome::rate_reduced: return "rate_reduced";
  }
  return "?";
}

namespace {

bool resistive(const std::optional<AttackSpec>& a) {
  return a && (std::holds_alternative<SerialInsertionAttack>(*a) ||
               std::holds_alternative<ParallelAttachmentAttack>(*a));
}

}  // namespace

void Scenario::validate() const {
  charger.validate();
  ev.validate();
  if (!(tick > 0.0)) throw std::invalid_argument("tick must be > 0");
  if (!(duration >= 0.0)) throw std::invalid_argument("duration must be >= 0");
  if (!(t_detect >= 0.0)) throw std::invalid_argument("t_detect must be >= 0");
  if (attack_engaged_at_start && !attack)
    throw std::invalid_argument("attack engaged at start but none configured");
  if (attack) {
    std::visit(
        [](const auto& a) {
          using T = std::decay_t<decltype(a)>;
          if constexpr (requires { a.validate(); }) a.validate();
          if constexpr (std::is_same_v<T, SerialInsertionAttack> ||
                        std::is_same_v<T, ParallelAttachmentAttack>)
            if (a.r_att.is_open() && std::is_same_v<T, SerialInsertionAttack>)
              throw std::invalid_argument("serial r_att must be finite");
        },
        *attack);
  }

  bool engaged = attack_engaged_at_start;
  double last = 0.0;
  for (std::size_t i = 0; i < timeline.size(); ++i) {
    const Event& e = timeline[i];
    const std::string where = fmt::format("event {} ({} at t={})", i,
                                          to_string(e.kind), e.t);
    if (!(e.t >= 0.0)) throw std::invalid_argument(where + ": negative time");
    if (e.t < last)
      throw std::invalid_argument(where + ": timeline not sorted by time");
    last = e.t;
    switch (e.kind) {
      case EventKind::engage_attack:
        if (!attack) throw std::invalid_argument(where + ": no attack configured");
        engaged = true;
        break;
      case EventKind::disengage_attack:
        engaged = false;
        break;
      case EventKind::set_r_att:
        if (!resistive(attack) || !engaged)
          throw std::invalid_argument(
              where + ": needs an engaged serial or parallel attack");
        if (!(e.value >= 0.0) || std::isinf(e.value))
          throw std::invalid_argument(where + ": r_att must be finite >= 0");
        break;
      default:
        break;
    }
  }
  if (duration + kTimeEps < last)
    throw std::invalid_argument("duration ends before the last event");
}

namespace {

struct DutyEffect {
  double ev_duty = 0.0;
  double attack_fraction = 0.0;
  bool failed = false;
};

class Simulator {
 public:
  explicit Simulator(const Scenario& s)
      : sc_(s), attack_(s.attack), engaged_(s.attack_engaged_at_start) {}

  SimReport run() {
    sc_.validate();
    SimReport rep;
    rep.scenario = sc_.name;
    rep.tick = sc_.tick;
    rep.supply_volts = sc_.charger.supply_volts;
    soc_ = sc_.ev.initial_soc;

    const auto n_ticks = static_cast<long long>(
        std::floor(sc_.duration / sc_.tick + kTimeEps));
    rep.trace.reserve(static_cast<std::size_t>(n_ticks) + 1);
    std::size_t next_event = 0;
    for (long long n = 0; n <= n_ticks; ++n) {
      // Snapped to 1 ns so times print as the tick multiples they are.
      const double t = std::round(static_cast<double>(n) * sc_.tick * 1e9) / 1e9;
      while (next_event < sc_.timeline.size() &&
             sc_.timeline[next_event].t <= t + kTimeEps)
        apply(sc_.timeline[next_event++]);
      rep.trace.push_back(step(t, rep));
    }

    rep.final_soc = soc_;
    rep.final_evse_state = evse_.state;
    rep.final_ev_state = ev_.state;
    return rep;
  }

 private:
  void apply(const Event& e) {
    switch (e.kind) {
      case EventKind::plug_in:
        command(EvCommand::plug_in);
        break;
      case EventKind::unplug:
        command(EvCommand::unplug);
        evse_ = evse_reset();
        perceived_ = EvInput{};
        hold_ = 0.0;
        break;
      case EventKind::replug:
        command(EvCommand::replug);
        evse_ = evse_reset();
        perceived_ = EvInput{};
        hold_ = 0.0;
        break;
      case EventKind::ev_start_charging:
        command(EvCommand::start_charging);
        break;
      case EventKind::ev_stop_charging:
        command(EvCommand::stop_charging);
        break;
      case EventKind::engage_attack:
        engaged_ = true;
        break;
      case EventKind::disengage_attack:
        engaged_ = false;
        break;
      case EventKind::set_r_att:
        std::visit(
            [&](auto& a) {
              if constexpr (requires { a.r_att; }) a.r_att = Resistance(e.value);
            },
            *attack_);
        break;
    }
  }

  void command(EvCommand c) {
    ev_ = ev_step(ev_, perceived_, sc_.ev, c, 0.0);
  }

  PilotSolution solve(Resistance r_v) const {
    const PilotSource& src = sc_.charger.source;
    const DiodeModel& d = sc_.ev.diode;
    if (engaged_ && attack_) {
      if (auto* s = std::get_if<SerialInsertionAttack>(&*attack_)) {
        SerialInsertionAttack open = *s;
        open.switch_closed = false;
        return apply_serial(open, src, r_v, d);
      }
      if (auto* p = std::get_if<ParallelAttachmentAttack>(&*attack_)) {
        ParallelAttachmentAttack closed = *p;
        closed.switch_closed = true;
        return apply_parallel(closed, src, r_v, d);
      }
      if (auto* a = std::get_if<AutomationAttack>(&*attack_))
        return apply_automation(*a, src, r_v, d);
    }
    return solve_baseline(src, r_v, d);
  }

  // EV-side duty under an engaged duty-cycle attack, from a waveform-level
  // run over a short window. Cached per (duty, high level).
  std::optional<DutyEffect> duty_attack(DutyCycle duty, double v_high,
                                        Resistance r_ev) {
    if (!engaged_ || !attack_) return std::nullopt;
    const bool tlc = std::holds_alternative<Tlc555Attack>(*attack_);
    const bool fake = std::holds_alternative<FakeLoadAttack>(*attack_);
    if (!tlc && !fake) return std::nullopt;

    const auto key = std::make_tuple(duty.percent(), v_high, r_ev.ohms());
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;

    const double freq = sc_.charger.pwm_freq;
    PwmParams p{freq, duty, v_high, sc_.charger.source.v_low};
    const SampledSignal pilot = synthesize(p, kDutyWindowPeriods / freq,
                                           kDutySamplesPerPeriod * freq);
    DutyEffect eff;
    if (tlc) {
      eff.ev_duty =
          measure(tlc555_apply(std::get<Tlc555Attack>(*attack_), pilot)).duty;
      eff.attack_fraction = 1.0 - eff.ev_duty / duty.percent();
    } else {
      const FakeLoadResult r = fake_load_transform(
          std::get<FakeLoadAttack>(*attack_), pilot, r_ev, sc_.charger);
      eff.ev_duty = measure(r.ev_side).duty;
      eff.attack_fraction = r.attack_fraction;
      eff.failed = r.attack_failed;
    }
    cache_.emplace(key, eff);
    return eff;
  }

  TraceRow step(double t, SimReport& rep) {
    const EvProfile& evp = sc_.ev;
    const double tick = sc_.tick;

    if (ev_.charging && soc_ >= evp.charge_limit_fraction)
      command(EvCommand::stop_charging);
    ev_ = ev_step(ev_, perceived_, evp, EvCommand::none, tick);

    const Resistance r_v = ev_.plugged ? ev_.presented_load : Resistance::open();
    PilotSolution v = solve(r_v);

    // Duty attacks act on the PWM the EVSE is currently emitting.
    std::optional<DutyEffect> duty_eff;
    if (evse_.pwm_active && ev_.plugged) {
      duty_eff = duty_attack(evse_.advertised_duty, v.v_evse, r_v);
      if (duty_eff && duty_eff->attack_fraction > 0.0) {
        if (auto* f = std::get_if<FakeLoadAttack>(&*attack_))
          v.v_evse = std::min(
              v.v_evse, solve_baseline(sc_.charger.source, f->r_f).v_evse);
        if (duty_eff->failed) rep.flags.duty_attack_failed = true;
      }
    }

    evse_ = evse_step(evse_, v.v_evse, sc_.charger, tick);

    TraceRow row;
    row.t = t;
    row.v_evse = v.v_evse;
    row.v_ev = ev_.plugged ? v.v_ev : 0.0;
    row.evse_state = evse_.state;
    row.ev_state = ev_.state;
    row.contactor_closed = evse_.contactor_closed;
    row.attack_engaged = engaged_;
    row.latched = ev_.latched_error;

    perceived_ = EvInput{};
    perceived_.v_high = v.v_ev;
    perceived_.pwm_present = evse_.pwm_active;
    double ev_duty = 100.0;
    if (evse_.pwm_active) {
      ev_duty = evse_.advertised_duty.percent();
      if (duty_eff) ev_duty = duty_eff->ev_duty;
    }
    perceived_.duty = DutyCycle(std::clamp(ev_duty, 0.0, 100.0));
    row.ev_duty = perceived_.duty.percent();

    if (!ev_.plugged)
      row.ev_perceived = ChargingState::A;
    else if (ev_.latched_error)
      row.ev_perceived = ChargingState::F;
    else
      row.ev_perceived = classify_ev_side(v.v_ev, sc_.charger, evp);

    // Link-level disparity: EVSE and EV reading different states.
    if (ev_.plugged && evse_.state != row.ev_perceived)
      hold_ += tick;
    else
      hold_ = 0.0;
    const bool disparity = ev_.plugged &&
                           detect_disparity(evse_.state, row.ev_perceived,
                                            hold_, sc_.t_detect);
    perceived_.link_fault = disparity;

    row.advertised_amps =
        evse_.pwm_active
            ? advertised_amps(duty_to_current(evse_.advertised_duty))
            : 0.0;
    row.ev_decoded_amps =
        perceived_.pwm_present ? advertised_amps(duty_to_current(perceived_.duty))
                               : 0.0;

    double to_battery = 0.0;
    if (evse_.contactor_closed && ev_.plugged) {
      if (ev_.charging) {
        row.drawn_amps = std::min(
            {row.ev_decoded_amps, evp.max_amps, row.advertised_amps});
        to_battery = row.drawn_amps;
      } else {
        rep.flags.unsolicited_energization = true;
        row.drawn_amps = std::min(evp.parasitic_amps, row.advertised_amps);
        if (evp.forced_energy_to_battery) to_battery = row.drawn_amps;
      }
    }
    const double supply = sc_.charger.supply_volts;
    rep.delivered_energy_kwh += row.drawn_amps * supply * tick / kJoulesPerKwh;
    const double battery_kwh = to_battery * supply * tick / kJoulesPerKwh;
    rep.battery_energy_kwh += battery_kwh;
    soc_ += battery_kwh / evp.battery_capacity_kwh;
    if (battery_kwh > 0.0 && soc_ > evp.charge_limit_fraction)
      rep.flags.overcharge_past_limit = true;
    row.soc = soc_;

    if (disparity) rep.flags.dos_communication_error = true;
    if (ev_.state == ChargingState::F) {
      if (ev_.cause == LatchCause::low_pilot_voltage)
        rep.flags.low_pilot_voltage_error = true;
      if (ev_.cause == LatchCause::communication)
        rep.flags.dos_communication_error = true;
    }
    if (ev_.latched_error) rep.flags.latched = true;
    return row;
  }

  Scenario sc_;
  std::optional<AttackSpec> attack_;
  bool engaged_;
  EvseStatus evse_ = evse_reset();
  EvStatus ev_ = ev_unplugged();
  EvInput perceived_;
  double hold_ = 0.0;
  double soc_ = 0.0;
  std::map<std::tuple<double, double, double>, DutyEffect> cache_;
};

}  // namespace

SimReport run(const Scenario& s) { return Simulator(s).run(); }

OutcomeSummary classify_outcome(const SimReport& report) {
  OutcomeSummary out;
  const SimFlags& f = report.flags;

  // Largest shortfall between what the EVSE offers and what the EV decodes.
  double worst_gap = 0.0;
  for (const TraceRow& r : report.trace) {
    if (r.advertised_amps <= 0.0) continue;
    const double gap = r.advertised_amps - r.ev_decoded_amps;
    if (gap > worst_gap) {
      worst_gap = gap;
      out.advertised_amps = r.advertised_amps;
      out.ev_amps = r.ev_decoded_amps;
    }
  }

  if (f.dos_communication_error) {
    out.outcome = Outcome::dos;
    out.text = f.latched ? "dos: communication error, EV latched in F"
                         : "dos: communication error";
  } else if (f.unsolicited_energization) {
    out.outcome = Outcome::forced_charging;
    out.text = f.overcharge_past_limit
                   ? "forced_charging: EVSE energized while EV stopped; "
                     "battery charged past its limit"
                   : "forced_charging: EVSE energized while EV stopped";
  } else if (f.latched || f.low_pilot_voltage_error) {
    out.outcome = Outcome::error_latched;
    out.text = "error_latched: low pilot voltage error";
  } else if (worst_gap > 1.0) {
    out.outcome = Outcome::rate_reduced;
    out.text = fmt::format("rate_reduced: {:.4g} A -> {:.4g} A",
                           out.advertised_amps, out.ev_amps);
  } else {
    out.outcome = Outcome::normal;
    out.text = "normal";
  }
  if (out.outcome != Outcome::rate_reduced && worst_gap <= 1.0) {
    out.advertised_amps = 0.0;
    out.ev_amps = 0.0;
  }
  return out;
}

}  // namespace pilotsim
