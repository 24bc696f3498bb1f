#include "pilotsim/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "pilotsim/analysis.hpp"
#include "pilotsim/attacks.hpp"
#include "pilotsim/io.hpp"
#include "pilotsim/sim.hpp"
#include "pilotsim/waveform.hpp"

namespace pilotsim::cli {

namespace {

enum class Format { table, json, csv };

struct Common {
  std::string profiles_path;
  Format format = Format::table;
  std::string output;
};

// Output stream for a command: the named file, or the caller's stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw io::FormatError("cannot write " + path);
      os_ = &file_;
    }
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

std::string sig4(double v) { return fmt::format("{:.4g}", v); }

std::string ohms4(Resistance r) {
  return r.is_open() ? "open" : sig4(r.ohms()) + " ohm";
}

std::string ohms4(const std::optional<Resistance>& r, const char* none) {
  return r ? ohms4(*r) : std::string(none);
}

io::ProfileSet profiles(const Common& c) {
  io::ProfileSet set = io::builtin_profiles();
  if (!c.profiles_path.empty()) set = io::load_profiles(c.profiles_path, set);
  return set;
}

void add_common(CLI::App* sub, Common& c, Format default_format) {
  c.format = default_format;
  sub->add_option("-o,--output", c.output, "write results to this file");
  sub->add_option("--format", c.format, "table, json or csv")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, Format>{{"table", Format::table},
                                        {"json", Format::json},
                                        {"csv", Format::csv}}))
      ->option_text("{table,json,csv}");
}

// ---- codec ---------------------------------------------------------------

int cmd_codec(const std::string& direction, double value, const Common& c,
              std::ostream& out) {
  Sink sink(c.output, out);
  if (direction == "decode") {
    const AmpacityReading r = duty_to_current(DutyCycle(value));
    if (c.format == Format::json)
      *sink << io::json{{"duty", value},
                        {"has_amps", r.has_amps()},
                        {"amps", advertised_amps(r)},
                        {"text", describe(r)}}
                   .dump(2)
            << '\n';
    else
      *sink << describe(r) << '\n';
  } else {
    const DutyCycle d = current_to_duty(value);
    if (c.format == Format::json)
      *sink << io::json{{"amps", value}, {"duty", d.percent()}}.dump(2) << '\n';
    else
      *sink << sig4(d.percent()) << " %\n";
  }
  return kExitOk;
}

// ---- solve ---------------------------------------------------------------

struct SolveArgs {
  std::string attack = "none";
  double r_att = 0.0;
  double r_v = 2740.0;
  std::string profile = "charger2";
  std::string ev = "tesla_model3";
};

// Names the boundary the voltage sits on, if it is within 10 mV of one.
std::string boundary_note(double v, const ChargerProfile& p) {
  std::vector<std::pair<double, std::string>> b{{p.v_ab, "A/B"}, {p.v_bc, "B/C"}};
  if (p.v_cd) b.emplace_back(*p.v_cd, "C/D");
  if (p.v_de) b.emplace_back(*p.v_de, "D/E");
  if (p.v_cf) b.emplace_back(*p.v_cf, "C/F");
  for (const auto& [threshold, name] : b)
    if (std::abs(v - threshold) < 0.01) return name + " boundary";
  return "";
}

int cmd_solve(const SolveArgs& a, const Common& c, std::ostream& out) {
  const io::ProfileSet set = profiles(c);
  const ChargerProfile& charger = set.charger(a.profile);
  const EvProfile& ev = set.ev(a.ev);
  const Resistance r_v(a.r_v);
  PilotSolution s;
  if (a.attack == "none")
    s = solve_baseline(charger.source, r_v, ev.diode);
  else if (a.attack == "serial")
    s = solve_serial(charger.source, Resistance(a.r_att), r_v, ev.diode);
  else if (a.attack == "parallel")
    s = solve_parallel(charger.source, Resistance(a.r_att), r_v, ev.diode);
  else
    throw std::invalid_argument("attack must be none, serial or parallel");

  const ChargingState evse = classify_state(s.v_evse, charger);
  const ChargingState evs = classify_ev_side(s.v_ev, charger, ev);
  Sink sink(c.output, out);
  switch (c.format) {
    case Format::json:
      *sink << io::json{{"profile", charger.name},
                        {"attack", a.attack},
                        {"r_att", a.r_att},
                        {"r_v", a.r_v},
                        {"v_evse", s.v_evse},
                        {"v_ev", s.v_ev},
                        {"v_diff", s.v_diff},
                        {"evse_state", std::string(1, to_char(evse))},
                        {"ev_state", std::string(1, to_char(evs))}}
                   .dump(2)
            << '\n';
      break;
    case Format::csv:
      *sink << "v_evse,v_ev,v_diff,evse_state,ev_state\n"
            << fmt::format("{},{},{},{},{}\n", s.v_evse, s.v_ev, s.v_diff,
                           to_char(evse), to_char(evs));
      break;
    case Format::table: {
      auto line = [&](const char* label, double v, ChargingState st) {
        std::string note = boundary_note(v, charger);
        *sink << fmt::format("{:<7} {:>7} V  state {}{}\n", label, sig4(v),
                             to_char(st), note.empty() ? "" : "  (" + note + ")");
      };
      line("v_evse", s.v_evse, evse);
      line("v_ev", s.v_ev, evs);
      *sink << fmt::format("{:<7} {:>7} V\n", "v_diff", sig4(s.v_diff));
      break;
    }
  }
  return kExitOk;
}

// ---- range ---------------------------------------------------------------

struct RangeArgs {
  std::string attack = "parallel";
  std::string goal = "B->C";
  std::string profile = "charger2";
  std::string ev = "tesla_model3";
};

int cmd_range(const RangeArgs& a, const Common& c, std::ostream& out) {
  const io::ProfileSet set = profiles(c);
  const ChargerProfile& charger = set.charger(a.profile);
  const EvProfile& ev = set.ev(a.ev);
  const Goal goal = parse_goal(a.goal);
  Sink sink(c.output, out);

  if (parse_attack_kind(a.attack) == AttackKind::parallel) {
    const FeasibilityRange r = parallel_range(goal, charger, ev);
    if (c.format == Format::json) {
      *sink << io::to_json(r).dump(2) << '\n';
    } else if (c.format == Format::csv) {
      auto cell = [](const std::optional<Resistance>& b) {
        return b && !b->is_open() ? fmt::format("{}", b->ohms()) : "";
      };
      *sink << "attack,goal,r_min,r_max,empty\n"
            << fmt::format("parallel,{},{},{},{}\n", to_string(goal),
                           cell(r.r_min), cell(r.r_max), int(r.empty));
    } else {
      *sink << fmt::format("{} parallel on {}: ", to_string(goal), charger.name);
      if (r.empty)
        *sink << "infeasible";
      else
        *sink << fmt::format("{} .. {}", ohms4(r.r_min, "0 ohm"),
                             ohms4(r.r_max, "open"));
      *sink << "\n  " << r.notes << '\n';
    }
    return kExitOk;
  }

  const SerialThresholds t = serial_range(goal, charger, ev);
  if (c.format == Format::json) {
    *sink << io::to_json(t).dump(2) << '\n';
  } else if (c.format == Format::csv) {
    *sink << "attack,goal,lambda,guaranteed,ev_crossing,evse_crossing\n"
          << fmt::format("serial,{},{},{},{},{}\n", to_string(goal), t.lambda,
                         t.guaranteed.ohms(), t.ev_crossing.ohms(),
                         t.evse_crossing.ohms());
  } else {
    *sink << fmt::format(
        "{} serial on {}: R_att >= {} (lambda {} V)\n"
        "  EV side crosses at {}, EVSE side crosses at {}\n",
        to_string(goal), charger.name, ohms4(t.guaranteed), sig4(t.lambda),
        ohms4(t.ev_crossing), ohms4(t.evse_crossing));
  }
  return kExitOk;
}

// ---- sweep ---------------------------------------------------------------

struct SweepArgs {
  std::string attack = "parallel";
  double r_min = 0.0;
  double r_max = 10000.0;
  std::size_t steps = 1000;
  std::string profile = "charger2";
  std::string ev = "tesla_model3";
  std::string state = "B";
};

int cmd_sweep(const SweepArgs& a, const Common& c, std::ostream& out) {
  if (a.r_min > a.r_max)
    throw std::invalid_argument("--r-min must not exceed --r-max");
  const io::ProfileSet set = profiles(c);
  const ChargerProfile& charger = set.charger(a.profile);
  const EvProfile& ev = set.ev(a.ev);
  const AttackKind kind = parse_attack_kind(a.attack);
  const ChargingState initial = parse_state(a.state);
  const std::vector<double> grid = linear_grid(a.r_min, a.r_max, a.steps);

  Sink sink(c.output, out);
  // An empty grid produces an empty file.
  if (grid.empty()) return kExitOk;
  const auto rows = sweep(kind, grid, charger, ev, initial);
  switch (c.format) {
    case Format::csv:
      io::write_sweep_csv(*sink, rows);
      break;
    case Format::json: {
      io::json arr = io::json::array();
      for (const SweepRow& r : rows)
        arr.push_back({{"r_att", r.r_att},
                       {"v_evse", r.v_evse},
                       {"v_ev", r.v_ev},
                       {"evse_state", std::string(1, to_char(r.evse_state))},
                       {"ev_state", std::string(1, to_char(r.ev_state))},
                       {"outcome", to_string(r.outcome)}});
      *sink << arr.dump(2) << '\n';
      break;
    }
    case Format::table:
      *sink << fmt::format("{:>10} {:>7} {:>7}  EVSE EV  outcome\n", "r_att",
                           "v_evse", "v_ev");
      for (const SweepRow& r : rows)
        *sink << fmt::format("{:>10} {:>7} {:>7}  {:<4} {:<3} {}\n",
                             sig4(r.r_att), sig4(r.v_evse), sig4(r.v_ev),
                             to_char(r.evse_state), to_char(r.ev_state),
                             to_string(r.outcome));
      break;
  }
  return kExitOk;
}

// ---- waveform ------------------------------------------------------------

struct WaveArgs {
  double duty = 50.0;
  double freq = 1000.0;
  double v_high = 12.0;
  double v_low = -12.0;
  double duration = 0.05;
  double rate = kDefaultSampleRate;
  std::string input;
  std::string attack = "tlc555";
  double r = 1000.0;
  double c = 158.3e-9;
  double dt_divider = FakeLoadAttack{}.dt_divider;
  double r_f = FakeLoadAttack{}.r_f.ohms();
  double r_v = 882.0;
  std::string profile = "charger2";
};

SampledSignal wave_input(const WaveArgs& a) {
  if (a.input.empty())
    return synthesize(PwmParams{a.freq, DutyCycle(a.duty), a.v_high, a.v_low},
                      a.duration, a.rate);
  std::ifstream in(a.input);
  if (!in) throw io::FormatError("cannot open " + a.input);
  return read_csv(in);
}

void print_measurement(std::ostream& os, const char* label,
                       const Measurement& m, Format f) {
  const AmpacityReading r = duty_to_current(DutyCycle(std::clamp(m.duty, 0.0, 100.0)));
  if (f == Format::json) {
    os << io::json{{"signal", label},
                   {"v_high", m.v_high},
                   {"v_low", m.v_low},
                   {"duty", m.duty},
                   {"freq", m.freq},
                   {"amps", advertised_amps(r)}}
              .dump()
       << '\n';
  } else if (f == Format::csv) {
    os << fmt::format("{},{},{},{},{},{}\n", label, m.v_high, m.v_low, m.duty,
                      m.freq, advertised_amps(r));
  } else {
    os << fmt::format("{:<5} high {} V  low {} V  duty {} %  freq {} Hz  -> {}\n",
                      label, sig4(m.v_high), sig4(m.v_low), sig4(m.duty),
                      sig4(m.freq), describe(r));
  }
}

int cmd_waveform(const std::string& action, const WaveArgs& a, const Common& c,
                 std::ostream& out) {
  if (action == "synth") {
    const SampledSignal s = wave_input(a);
    Sink sink(c.output, out);
    write_csv(*sink, s);
    return kExitOk;
  }
  if (action == "measure") {
    const SampledSignal s = wave_input(a);
    Sink sink(c.output, out);
    if (c.format == Format::csv) *sink << "signal,v_high,v_low,duty,freq,amps\n";
    print_measurement(*sink, "input", measure(s), c.format);
    return kExitOk;
  }

  // transform: CSV of the EV-side signal to --output, summary to stdout.
  const SampledSignal s = wave_input(a);
  SampledSignal ev_side;
  if (a.attack == "tlc555") {
    ev_side = tlc555_apply(Tlc555Attack{Resistance(a.r), a.c, 0.0}, s);
  } else if (a.attack == "fake_load") {
    const io::ProfileSet set = profiles(c);
    FakeLoadAttack f;
    f.dt_divider = a.dt_divider;
    f.r_f = Resistance(a.r_f);
    ev_side = fake_load_transform(f, s, Resistance(a.r_v), set.charger(a.profile))
                  .ev_side;
  } else {
    throw std::invalid_argument("--attack must be tlc555 or fake_load");
  }
  if (!c.output.empty()) {
    Sink sink(c.output, out);
    write_csv(*sink, ev_side);
  }
  if (c.format == Format::csv) out << "signal,v_high,v_low,duty,freq,amps\n";
  print_measurement(out, "evse", measure(s), c.format);
  print_measurement(out, "ev", measure(ev_side), c.format);
  return kExitOk;
}

// ---- simulate ------------------------------------------------------------

int exit_code_for(Outcome o) {
  switch (o) {
    case Outcome::normal: return kExitOk;
    case Outcome::dos: return kExitDos;
    case Outcome::forced_charging: return kExitForcedCharging;
    case Outcome::error_latched: return kExitErrorLatched;
    case Outcome::rate_reduced: return kExitRateReduced;
  }
  return kExitInternal;
}

struct SimArgs {
  std::string scenario;
  std::string trace;
  bool with_trace = false;
};

int cmd_simulate(const SimArgs& a, const Common& c, std::ostream& out) {
  const Scenario s = io::load_scenario(a.scenario, profiles(c));
  const SimReport report = run(s);
  const OutcomeSummary summary = classify_outcome(report);

  if (!c.output.empty()) {
    Sink sink(c.output, out);
    *sink << io::to_json(report, summary, a.with_trace).dump(2) << '\n';
  } else if (c.format == Format::json) {
    out << io::to_json(report, summary, a.with_trace).dump(2) << '\n';
  }
  if (!a.trace.empty()) {
    Sink sink(a.trace, out);
    io::write_trace_csv(*sink, report);
  }
  if (c.format != Format::json || !c.output.empty())
    out << report.scenario << ": " << summary.text << '\n';
  return exit_code_for(summary.outcome);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Control-pilot attack simulator", "pilotsim"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--profiles", common.profiles_path,
                 "profiles JSON merged over the bundled set")
      ->check(CLI::ExistingFile);

  std::string codec_dir;
  double codec_value = 0.0;
  Common codec_c = common;
  auto* codec = app.add_subcommand("codec", "duty cycle <-> amps");
  codec->add_option("direction", codec_dir, "encode (amps) or decode (duty %)")
      ->required()
      ->check(CLI::IsMember({"encode", "decode"}));
  codec->add_option("value", codec_value)->required();
  add_common(codec, codec_c, Format::table);

  SolveArgs solve_a;
  Common solve_c;
  auto* solve = app.add_subcommand("solve", "pilot voltages for one circuit");
  solve->add_option("--attack", solve_a.attack)
      ->check(CLI::IsMember({"none", "serial", "parallel"}));
  solve->add_option("--r-att", solve_a.r_att, "attack resistor, ohms");
  solve->add_option("--r-v", solve_a.r_v, "EV load, ohms");
  solve->add_option("--profile", solve_a.profile, "charger profile");
  solve->add_option("--ev", solve_a.ev, "EV profile");
  add_common(solve, solve_c, Format::table);

  RangeArgs range_a;
  Common range_c;
  auto* range = app.add_subcommand("range", "feasible attack resistances");
  range->add_option("--attack", range_a.attack)
      ->check(CLI::IsMember({"serial", "parallel"}));
  range->add_option("--goal", range_a.goal,
                    "B->C, C->F, B->F (parallel); A<-B->C, B<-C->F (serial)");
  range->add_option("--profile", range_a.profile);
  range->add_option("--ev", range_a.ev);
  add_common(range, range_c, Format::table);

  SweepArgs sweep_a;
  Common sweep_c;
  auto* sw = app.add_subcommand("sweep", "tabulate a resistance sweep");
  sw->add_option("--attack", sweep_a.attack)
      ->check(CLI::IsMember({"serial", "parallel"}));
  sw->add_option("--r-min", sweep_a.r_min);
  sw->add_option("--r-max", sweep_a.r_max);
  sw->add_option("--steps", sweep_a.steps);
  sw->add_option("--profile", sweep_a.profile);
  sw->add_option("--ev", sweep_a.ev);
  sw->add_option("--state", sweep_a.state, "EV state whose load is presented");
  add_common(sw, sweep_c, Format::csv);

  std::string wave_action;
  WaveArgs wave_a;
  Common wave_c;
  auto* wave = app.add_subcommand("waveform", "sampled PWM tools");
  wave->add_option("action", wave_action, "synth, measure or transform")
      ->required()
      ->check(CLI::IsMember({"synth", "measure", "transform"}));
  wave->add_option("--duty", wave_a.duty, "percent");
  wave->add_option("--freq", wave_a.freq, "Hz");
  wave->add_option("--v-high", wave_a.v_high);
  wave->add_option("--v-low", wave_a.v_low);
  wave->add_option("--duration", wave_a.duration, "seconds");
  wave->add_option("--rate", wave_a.rate, "samples per second");
  wave->add_option("--input", wave_a.input, "time,volts CSV instead of --duty");
  wave->add_option("--attack", wave_a.attack, "tlc555 or fake_load");
  wave->add_option("--r", wave_a.r, "TLC555 timing resistor, ohms");
  wave->add_option("--c", wave_a.c, "TLC555 timing capacitor, farads");
  wave->add_option("--dt-divider", wave_a.dt_divider, "fake-load DT divider");
  wave->add_option("--r-f", wave_a.r_f, "fake load, ohms");
  wave->add_option("--r-v", wave_a.r_v, "EV load during the attack, ohms");
  wave->add_option("--profile", wave_a.profile);
  add_common(wave, wave_c, Format::table);

  SimArgs sim_a;
  Common sim_c;
  auto* sim = app.add_subcommand("simulate", "run a scenario file");
  sim->add_option("scenario", sim_a.scenario)->required()->check(CLI::ExistingFile);
  sim->add_option("--trace", sim_a.trace, "per-tick CSV trace");
  sim->add_flag("--with-trace", sim_a.with_trace, "embed the trace in the JSON");
  add_common(sim, sim_c, Format::table);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  auto with_global = [&](Common c) {
    c.profiles_path = common.profiles_path;
    return c;
  };
  try {
    if (*codec) return cmd_codec(codec_dir, codec_value, with_global(codec_c), out);
    if (*solve) return cmd_solve(solve_a, with_global(solve_c), out);
    if (*range) return cmd_range(range_a, with_global(range_c), out);
    if (*sw) return cmd_sweep(sweep_a, with_global(sweep_c), out);
    if (*wave) return cmd_waveform(wave_action, wave_a, with_global(wave_c), out);
    if (*sim) return cmd_simulate(sim_a, with_global(sim_c), out);
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const io::FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace pilotsim::cli
