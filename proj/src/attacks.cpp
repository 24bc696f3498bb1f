#include "pilotsim/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace pilotsim {

void AutomationAttack::validate() const {
  auto positive = [](Resistance r) { return !r.is_open() && r.ohms() > 0.0; };
  if (!(positive(r4) && positive(r5)))
    throw std::invalid_argument("automation divider resistors must be > 0");
  if (!(v_ref > 0.0 && v_ref < 12.0))
    throw std::invalid_argument("automation v_ref must be in (0, 12) V");
  if (!(drop_v >= 0.0)) throw std::invalid_argument("drop_v must be >= 0");
}

double AutomationAttack::divider_ratio() const {
  return r5.ohms() / (r4.ohms() + r5.ohms());
}

void Tlc555Attack::validate() const {
  if (r.is_open() || !(r.ohms() > 0.0) || !(c > 0.0))
    throw std::invalid_argument("TLC555 R and C must be > 0");
}

void FakeLoadAttack::validate() const {
  if (!(tau_dt > 0.0 && tau_state >= 50.0 * tau_dt))
    throw std::invalid_argument("fake load needs tau_state >= 50 * tau_dt > 0");
  if (!(v_ref > 0.0)) throw std::invalid_argument("fake load v_ref must be > 0");
  if (r_f.is_open()) throw std::invalid_argument("fake load r_f must be finite");
  if (!(state_divider > 0.0 && state_divider <= 1.0 && dt_divider > 0.0 &&
        dt_divider <= 1.0))
    throw std::invalid_argument("fake load dividers must be in (0, 1]");
  if (!(tau_edge >= 0.0)) throw std::invalid_argument("tau_edge must be >= 0");
}

std::string attack_kind(const AttackSpec& a) {
  struct Namer {
    std::string operator()(const SerialInsertionAttack&) const { return "serial"; }
    std::string operator()(const ParallelAttachmentAttack&) const { return "parallel"; }
    std::string operator()(const AutomationAttack&) const { return "automation"; }
    std::string operator()(const Tlc555Attack&) const { return "tlc555"; }
    std::string operator()(const FakeLoadAttack&) const { return "fake_load"; }
  };
  return std::visit(Namer{}, a);
}

PilotSolution apply_serial(const SerialInsertionAttack& att,
                           const PilotSource& src, Resistance r_v,
                           const DiodeModel& diode) {
  return solve_serial(src, att.effective(), r_v, diode);
}

PilotSolution apply_parallel(const ParallelAttachmentAttack& att,
                             const PilotSource& src, Resistance r_v,
                             const DiodeModel& diode) {
  return solve_parallel(src, att.branch(), r_v, diode, att.diode);
}

AutomationOutput automation_output(const AutomationAttack& att,
                                   double v_pilot_high) {
  att.validate();
  const double pin4 = v_pilot_high * att.divider_ratio();
  AutomationOutput out;
  out.active = pin4 < att.v_ref;
  out.v_out =
      out.active ? std::max(0.0, v_pilot_high - att.drop_v) : v_pilot_high;
  return out;
}

PilotSolution apply_automation(const AutomationAttack& att,
                               const PilotSource& src, Resistance r_v,
                               const DiodeModel& diode) {
  PilotSolution s = solve_baseline(src, r_v, diode);
  const double v = automation_output(att, s.v_evse).v_out;
  return PilotSolution{v, v, 0.0};
}

PwmParams tlc555_transform(const Tlc555Attack& att, const PwmParams& input) {
  att.validate();
  input.validate();
  if (input.duty.percent() <= 0.0 || input.duty.percent() >= 100.0)
    throw std::invalid_argument("TLC555 needs a PWM input (0 < duty < 100)");
  const double high = att.high_time();
  if (high >= input.period())
    throw std::invalid_argument(fmt::format(
        "1.1*R*C = {} s does not fit in a {} s period", high, input.period()));
  PwmParams out = input;
  out.duty = DutyCycle(100.0 * high * input.freq);
  out.v_high = input.v_high + att.level_offset;
  return out;
}

SampledSignal tlc555_apply(const Tlc555Attack& att, const SampledSignal& input) {
  att.validate();
  const Measurement m = measure(input);
  if (m.freq > 0.0 && att.high_time() >= 1.0 / m.freq)
    throw std::invalid_argument("1.1*R*C does not fit in one input period");
  const double mid = 0.5 * (m.v_high + m.v_low);
  const auto width =
      static_cast<std::size_t>(std::llround(att.high_time() * input.sample_rate));
  SampledSignal out{input.sample_rate,
                    std::vector<double>(input.samples.size(), m.v_low)};
  std::size_t remaining = 0;
  for (std::size_t n = 0; n < input.samples.size(); ++n) {
    if (n > 0 && input.samples[n - 1] <= mid && input.samples[n] > mid)
      remaining = width;
    if (remaining > 0) {
      out.samples[n] = m.v_high + att.level_offset;
      --remaining;
    }
  }
  return out;
}

namespace {

// DT-capacitor voltage at each rising edge in periodic steady state, for a
// rectified pulse train of height v_high.
double dt_valley(const FakeLoadAttack& att, double v_high, DutyCycle duty,
                 double freq) {
  const double period = 1.0 / freq;
  const double a = std::exp(-duty.fraction() * period / att.tau_dt);
  const double b = std::exp(-(1.0 - duty.fraction()) * period / att.tau_dt);
  return v_high * (1.0 - a) * b / (1.0 - a * b);
}

}  // namespace

std::optional<double> fake_load_crossing_time(const FakeLoadAttack& att,
                                              double v_high, DutyCycle duty,
                                              double freq) {
  att.validate();
  // Threshold referred to the capacitor, before the divider.
  const double u = att.v_ref / att.dt_divider;
  const double valley = dt_valley(att, v_high, duty, freq);
  if (valley >= u) return 0.0;
  const double high_time = duty.fraction() / freq;
  const double peak =
      v_high + (valley - v_high) * std::exp(-high_time / att.tau_dt);
  if (peak <= u) return std::nullopt;
  return att.tau_dt * std::log((v_high - valley) / (v_high - u));
}

double fake_load_dt_divider_for(const FakeLoadAttack& att, double v_high,
                                DutyCycle input, DutyCycle target,
                                double freq) {
  if (!(target.percent() > 0.0 && target < input))
    throw std::invalid_argument("target duty must be in (0, input duty)");
  const double valley = dt_valley(att, v_high, input, freq);
  const double t = target.fraction() / freq;
  const double u = v_high - (v_high - valley) * std::exp(-t / att.tau_dt);
  return att.v_ref / u;
}

FakeLoadResult fake_load_transform(const FakeLoadAttack& att,
                                   const SampledSignal& evse_signal,
                                   Resistance r_ev,
                                   const ChargerProfile& charger,
                                   FakeLoadMode mode) {
  att.validate();
  const std::size_t n_total = evse_signal.samples.size();
  const Measurement m = measure(evse_signal);
  const SampledSignal rect = rectify(evse_signal, DiodeModel{});

  // Both capacitors start settled at the mean of the first period.
  std::size_t first_period = n_total;
  if (m.freq > 0.0)
    first_period = std::min<std::size_t>(
        n_total, static_cast<std::size_t>(
                     std::llround(evse_signal.sample_rate / m.freq)));
  double settled = 0.0;
  for (std::size_t n = 0; n < first_period; ++n) settled += rect.samples[n];
  if (first_period > 0) settled /= static_cast<double>(first_period);

  FakeLoadResult res;
  res.state_signal = rc_filter(rect, RcStage{att.tau_state}, settled);
  res.dt_signal = rc_filter(rect, RcStage{att.tau_dt}, settled);
  for (double& v : res.state_signal.samples) v *= att.state_divider;
  for (double& v : res.dt_signal.samples) v *= att.dt_divider;

  // Ideal-switch mode replaces the DT comparator with its closed-form
  // steady-state crossing, measured from each rising edge.
  std::optional<std::size_t> ideal_cross;
  if (mode == FakeLoadMode::ideal_switch && m.freq > 0.0) {
    const auto rm = measure(rect);
    if (auto t = fake_load_crossing_time(att, rm.v_high, DutyCycle(m.duty),
                                         m.freq))
      ideal_cross = static_cast<std::size_t>(
          std::llround(*t * evse_signal.sample_rate));
  }

  const double mid = 0.5 * (m.v_high + m.v_low);
  res.ev_side = SampledSignal{evse_signal.sample_rate, std::vector<double>(n_total)};
  res.evse_load.assign(n_total, r_ev);
  std::size_t high_samples = 0, diverted_high = 0, diverted_any = 0;
  std::size_t high_start = 0;
  for (std::size_t n = 0; n < n_total; ++n) {
    const double v = evse_signal.samples[n];
    const bool high = v > mid;
    if (high && (n == 0 || evse_signal.samples[n - 1] <= mid)) high_start = n;
    const bool gate = res.state_signal.samples[n] < att.v_ref;
    bool attack = false;
    if (gate) {
      if (mode == FakeLoadMode::rc_faithful)
        attack = res.dt_signal.samples[n] > att.v_ref;
      else
        attack = high && ideal_cross && n - high_start >= *ideal_cross;
    }
    res.ev_side.samples[n] = attack ? att.v_ss : v;
    if (attack) {
      res.evse_load[n] = att.r_f;
      ++diverted_any;
    }
    if (high) {
      ++high_samples;
      if (attack) ++diverted_high;
    }
  }
  if (high_samples > 0)
    res.attack_fraction =
        static_cast<double>(diverted_high) / static_cast<double>(high_samples);

  if (mode == FakeLoadMode::rc_faithful && att.tau_edge > 0.0)
    res.ev_side = rc_filter(res.ev_side, RcStage{att.tau_edge});

  const double v_fake = solve_baseline(charger.source, att.r_f).v_evse;
  res.evse_state_during_attack = classify_state(v_fake, charger);
  res.attack_failed =
      diverted_any > 0 && res.evse_state_during_attack != ChargingState::C;
  return res;
}

}  // namespace pilotsim
