#include "pilotsim/io.hpp"

#include <fstream>
#include <ostream>
#include <set>

#include <fmt/format.h>

namespace pilotsim::io {

namespace {

json resistance_json(Resistance r) {
  return r.is_open() ? json("open") : json(r.ohms());
}

Resistance resistance_from(const json& v, const std::string& key) {
  if (v.is_string() && v.get<std::string>() == "open") return Resistance::open();
  if (!v.is_number())
    throw FormatError(fmt::format("'{}' must be ohms or \"open\"", key));
  try {
    return Resistance(v.get<double>());
  } catch (const std::invalid_argument& e) {
    throw FormatError(fmt::format("'{}': {}", key, e.what()));
  }
}

json optional_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

// Reads listed keys from an object and rejects any key nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string context)
      : j_(j), context_(std::move(context)) {
    if (!j_.is_object())
      throw FormatError(context_ + ": expected a JSON object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "a number");
      out = v->get<double>();
    }
  }
  void optional_number(const std::string& key, std::optional<double>& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) out.reset();
      else if (v->is_number()) out = v->get<double>();
      else fail(key, "a number or null");
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "true or false");
      out = v->get<bool>();
    }
  }
  void string(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "a string");
      out = v->get<std::string>();
    }
  }
  void resistance(const std::string& key, Resistance& out) {
    if (const json* v = find(key)) out = resistance_from(*v, context_ + "." + key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key()))
        throw FormatError(
            fmt::format("{}: unknown key '{}'", context_, it.key()));
  }

  const std::string& context() const { return context_; }

 private:
  [[noreturn]] void fail(const std::string& key, const char* what) const {
    throw FormatError(fmt::format("{}.{} must be {}", context_, key, what));
  }

  const json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

DiodeModel diode_from(const json& j, DiodeModel d, const std::string& ctx) {
  Fields f(j, ctx);
  f.number("forward_drop", d.forward_drop);
  f.boolean("blocks_negative", d.blocks_negative);
  f.finish();
  return d;
}

json diode_json(const DiodeModel& d) {
  return json{{"forward_drop", d.forward_drop},
              {"blocks_negative", d.blocks_negative}};
}

template <typename T>
void validated(const T& value, const std::string& ctx) {
  try {
    value.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(fmt::format("{}: {}", ctx, e.what()));
  }
}

std::string known_names(const auto& items) {
  std::string out;
  for (const auto& p : items) out += (out.empty() ? "" : ", ") + p.name;
  return out;
}

}  // namespace

const ChargerProfile& ProfileSet::charger(std::string_view name) const {
  for (const auto& c : chargers)
    if (c.name == name) return c;
  throw FormatError(fmt::format("unknown charger profile '{}' (known: {})",
                                name, known_names(chargers)));
}

const EvProfile& ProfileSet::ev(std::string_view name) const {
  for (const auto& e : evs)
    if (e.name == name) return e;
  throw FormatError(fmt::format("unknown EV profile '{}' (known: {})", name,
                                known_names(evs)));
}

ProfileSet builtin_profiles() { return {builtin_chargers(), builtin_evs()}; }

json to_json(const ChargerProfile& c) {
  return json{{"name", c.name},
              {"v_high", c.source.v_high},
              {"v_low", c.source.v_low},
              {"r1", resistance_json(c.source.r1)},
              {"v_ab", c.v_ab},
              {"v_bc", c.v_bc},
              {"v_cd", optional_json(c.v_cd)},
              {"v_de", optional_json(c.v_de)},
              {"v_cf", optional_json(c.v_cf)},
              {"has_state_f", c.has_state_f},
              {"v_e_band", c.v_e_band},
              {"max_amps", c.max_amps},
              {"supply_volts", c.supply_volts},
              {"pwm_freq", c.pwm_freq},
              {"latch_errors", c.latch_errors},
              {"lambda_b", optional_json(c.lambda_b)},
              {"lambda_c", optional_json(c.lambda_c)}};
}

ChargerProfile charger_from_json(const json& j, ChargerProfile c) {
  Fields f(j, "charger '" + c.name + "'");
  f.string("name", c.name);
  f.number("v_high", c.source.v_high);
  f.number("v_low", c.source.v_low);
  f.resistance("r1", c.source.r1);
  f.number("v_ab", c.v_ab);
  f.number("v_bc", c.v_bc);
  f.optional_number("v_cd", c.v_cd);
  f.optional_number("v_de", c.v_de);
  f.optional_number("v_cf", c.v_cf);
  f.boolean("has_state_f", c.has_state_f);
  f.number("v_e_band", c.v_e_band);
  f.number("max_amps", c.max_amps);
  f.number("supply_volts", c.supply_volts);
  f.number("pwm_freq", c.pwm_freq);
  f.boolean("latch_errors", c.latch_errors);
  f.optional_number("lambda_b", c.lambda_b);
  f.optional_number("lambda_c", c.lambda_c);
  f.find("base");  // consumed by the caller
  f.finish();
  validated(c, f.context());
  return c;
}

json to_json(const EvProfile& e) {
  return json{{"name", e.name},
              {"r_state_b", resistance_json(e.r_state_b)},
              {"r_state_c", resistance_json(e.r_state_c)},
              {"r_state_d", resistance_json(e.r_state_d)},
              {"diode", diode_json(e.diode)},
              {"error_latch", e.error_latch},
              {"expected_band_tolerance", e.expected_band_tolerance},
              {"v_low_pilot_error", e.v_low_pilot_error},
              {"battery_capacity_kwh", e.battery_capacity_kwh},
              {"charge_limit_fraction", e.charge_limit_fraction},
              {"initial_soc", e.initial_soc},
              {"max_amps", e.max_amps},
              {"handshake_delay", e.handshake_delay},
              {"debounce", e.debounce},
              {"parasitic_amps", e.parasitic_amps},
              {"forced_energy_to_battery", e.forced_energy_to_battery}};
}

EvProfile ev_from_json(const json& j, EvProfile e) {
  Fields f(j, "ev '" + e.name + "'");
  f.string("name", e.name);
  f.resistance("r_state_b", e.r_state_b);
  f.resistance("r_state_c", e.r_state_c);
  f.resistance("r_state_d", e.r_state_d);
  if (const json* d = f.find("diode"))
    e.diode = diode_from(*d, e.diode, f.context() + ".diode");
  f.boolean("error_latch", e.error_latch);
  f.number("expected_band_tolerance", e.expected_band_tolerance);
  f.number("v_low_pilot_error", e.v_low_pilot_error);
  f.number("battery_capacity_kwh", e.battery_capacity_kwh);
  f.number("charge_limit_fraction", e.charge_limit_fraction);
  f.number("initial_soc", e.initial_soc);
  f.number("max_amps", e.max_amps);
  f.number("handshake_delay", e.handshake_delay);
  f.number("debounce", e.debounce);
  f.number("parasitic_amps", e.parasitic_amps);
  f.boolean("forced_energy_to_battery", e.forced_energy_to_battery);
  f.find("base");
  f.finish();
  validated(e, f.context());
  return e;
}

namespace {

template <typename P>
void upsert(std::vector<P>& list, P p) {
  for (auto& existing : list)
    if (existing.name == p.name) {
      existing = std::move(p);
      return;
    }
  list.push_back(std::move(p));
}

template <typename P>
P entry_base(const std::vector<P>& list, const std::string& name,
             const json& body) {
  std::string base_name = name;
  if (auto it = body.find("base"); body.is_object() && it != body.end()) {
    if (!it->is_string()) throw FormatError(name + ".base must be a string");
    base_name = it->template get<std::string>();
  }
  for (const auto& p : list)
    if (p.name == base_name) return p;
  if (base_name != name)
    throw FormatError(fmt::format("'{}': unknown base profile '{}' (known: {})",
                                  name, base_name, known_names(list)));
  P fresh;
  fresh.name = name;
  return fresh;
}

}  // namespace

ProfileSet profiles_from_json(const json& j, const ProfileSet& base) {
  ProfileSet out = base;
  Fields top(j, "profiles");
  if (const json* chargers = top.find("chargers")) {
    if (!chargers->is_object())
      throw FormatError("profiles.chargers must be an object");
    for (auto it = chargers->begin(); it != chargers->end(); ++it) {
      ChargerProfile start = entry_base(out.chargers, it.key(), *it);
      start.name = it.key();
      upsert(out.chargers, charger_from_json(*it, start));
    }
  }
  if (const json* evs = top.find("evs")) {
    if (!evs->is_object()) throw FormatError("profiles.evs must be an object");
    for (auto it = evs->begin(); it != evs->end(); ++it) {
      EvProfile start = entry_base(out.evs, it.key(), *it);
      start.name = it.key();
      upsert(out.evs, ev_from_json(*it, start));
    }
  }
  top.finish();
  return out;
}

ProfileSet load_profiles(const std::filesystem::path& path,
                         const ProfileSet& base) {
  return profiles_from_json(read_json_file(path), base);
}

json profiles_to_json(const ProfileSet& set) {
  json chargers = json::object(), evs = json::object();
  for (const auto& c : set.chargers) {
    json body = to_json(c);
    body.erase("name");
    chargers[c.name] = std::move(body);
  }
  for (const auto& e : set.evs) {
    json body = to_json(e);
    body.erase("name");
    evs[e.name] = std::move(body);
  }
  return json{{"chargers", chargers}, {"evs", evs}};
}

AttackSpec attack_from_json(const json& j) {
  Fields f(j, "attack");
  std::string kind;
  f.string("kind", kind);
  AttackSpec spec;
  if (kind == "serial") {
    SerialInsertionAttack a;
    f.resistance("r_att", a.r_att);
    f.boolean("switch_closed", a.switch_closed);
    spec = a;
  } else if (kind == "parallel") {
    ParallelAttachmentAttack a;
    f.resistance("r_att", a.r_att);
    f.boolean("switch_closed", a.switch_closed);
    if (const json* d = f.find("diode"))
      a.diode = diode_from(*d, a.diode, "attack.diode");
    spec = a;
  } else if (kind == "automation") {
    AutomationAttack a;
    f.resistance("r4", a.r4);
    f.resistance("r5", a.r5);
    f.number("v_ref", a.v_ref);
    f.number("drop_v", a.drop_v);
    validated(a, "attack");
    spec = a;
  } else if (kind == "tlc555") {
    Tlc555Attack a;
    f.resistance("r", a.r);
    f.number("c", a.c);
    f.number("level_offset", a.level_offset);
    validated(a, "attack");
    spec = a;
  } else if (kind == "fake_load") {
    FakeLoadAttack a;
    f.number("tau_state", a.tau_state);
    f.number("tau_dt", a.tau_dt);
    f.number("v_ref", a.v_ref);
    f.resistance("r_f", a.r_f);
    f.number("v_ss", a.v_ss);
    f.number("state_divider", a.state_divider);
    f.number("dt_divider", a.dt_divider);
    f.number("tau_edge", a.tau_edge);
    validated(a, "attack");
    spec = a;
  } else {
    throw FormatError(fmt::format(
        "attack.kind '{}' is not one of serial, parallel, automation, tlc555, "
        "fake_load",
        kind));
  }
  f.finish();
  return spec;
}

json to_json(const AttackSpec& spec) {
  json j{{"kind", attack_kind(spec)}};
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, SerialInsertionAttack>) {
          j["r_att"] = resistance_json(a.r_att);
          j["switch_closed"] = a.switch_closed;
        } else if constexpr (std::is_same_v<T, ParallelAttachmentAttack>) {
          j["r_att"] = resistance_json(a.r_att);
          j["switch_closed"] = a.switch_closed;
          j["diode"] = diode_json(a.diode);
        } else if constexpr (std::is_same_v<T, AutomationAttack>) {
          j["r4"] = resistance_json(a.r4);
          j["r5"] = resistance_json(a.r5);
          j["v_ref"] = a.v_ref;
          j["drop_v"] = a.drop_v;
        } else if constexpr (std::is_same_v<T, Tlc555Attack>) {
          j["r"] = resistance_json(a.r);
          j["c"] = a.c;
          j["level_offset"] = a.level_offset;
        } else {
          j["tau_state"] = a.tau_state;
          j["tau_dt"] = a.tau_dt;
          j["v_ref"] = a.v_ref;
          j["r_f"] = resistance_json(a.r_f);
          j["v_ss"] = a.v_ss;
          j["state_divider"] = a.state_divider;
          j["dt_divider"] = a.dt_divider;
          j["tau_edge"] = a.tau_edge;
        }
      },
      spec);
  return j;
}

namespace {

template <typename P, typename Lookup, typename Parse>
P profile_ref(const json& v, const std::string& key, Lookup lookup,
              Parse parse) {
  if (v.is_string()) return lookup(v.template get<std::string>());
  if (!v.is_object())
    throw FormatError("scenario." + key + " must be a name or an object");
  std::string base;
  if (auto it = v.find("base"); it != v.end()) {
    if (!it->is_string())
      throw FormatError("scenario." + key + ".base must be a string");
    base = it->template get<std::string>();
  }
  P start;
  if (!base.empty()) start = lookup(base);
  return parse(v, start);
}

}  // namespace

Scenario scenario_from_json(const json& j, const ProfileSet& profiles) {
  Fields f(j, "scenario");
  Scenario s;
  f.string("name", s.name);
  const json* charger = f.find("charger");
  const json* ev = f.find("ev");
  if (!charger || !ev)
    throw FormatError("scenario needs both 'charger' and 'ev'");
  s.charger = profile_ref<ChargerProfile>(
      *charger, "charger",
      [&](const std::string& n) { return profiles.charger(n); },
      [](const json& v, ChargerProfile c) { return charger_from_json(v, c); });
  s.ev = profile_ref<EvProfile>(
      *ev, "ev", [&](const std::string& n) { return profiles.ev(n); },
      [](const json& v, EvProfile e) { return ev_from_json(v, e); });
  if (const json* a = f.find("attack"); a && !a->is_null())
    s.attack = attack_from_json(*a);
  f.boolean("attack_engaged_at_start", s.attack_engaged_at_start);
  f.number("duration", s.duration);
  f.number("tick", s.tick);
  f.number("t_detect", s.t_detect);
  if (const json* tl = f.find("timeline")) {
    if (!tl->is_array()) throw FormatError("scenario.timeline must be an array");
    for (std::size_t i = 0; i < tl->size(); ++i) {
      Fields ef((*tl)[i], fmt::format("scenario.timeline[{}]", i));
      Event e;
      std::string kind;
      ef.number("t", e.t);
      ef.string("kind", kind);
      ef.number("value", e.value);
      ef.finish();
      try {
        e.kind = parse_event_kind(kind);
      } catch (const std::invalid_argument& err) {
        throw FormatError(ef.context() + ": " + err.what());
      }
      s.timeline.push_back(e);
    }
  }
  f.finish();
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(fmt::format("scenario '{}': {}", s.name, e.what()));
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path,
                       const ProfileSet& profiles) {
  Scenario s = scenario_from_json(read_json_file(path), profiles);
  if (s.name.empty()) s.name = path.stem().string();
  return s;
}

json to_json(const Scenario& s) {
  json timeline = json::array();
  for (const Event& e : s.timeline) {
    json ev{{"t", e.t}, {"kind", to_string(e.kind)}};
    if (e.kind == EventKind::set_r_att) ev["value"] = e.value;
    timeline.push_back(std::move(ev));
  }
  json charger = to_json(s.charger), ev = to_json(s.ev);
  charger.erase("name");
  ev.erase("name");
  return json{{"name", s.name},
              {"charger", charger},
              {"ev", ev},
              {"attack", s.attack ? to_json(*s.attack) : json(nullptr)},
              {"attack_engaged_at_start", s.attack_engaged_at_start},
              {"duration", s.duration},
              {"tick", s.tick},
              {"t_detect", s.t_detect},
              {"timeline", timeline}};
}

namespace {

std::string state_str(ChargingState s) { return std::string(1, to_char(s)); }

json trace_row_json(const TraceRow& r) {
  return json{{"t", r.t},
              {"v_evse", r.v_evse},
              {"v_ev", r.v_ev},
              {"evse_state", state_str(r.evse_state)},
              {"ev_state", state_str(r.ev_state)},
              {"ev_perceived", state_str(r.ev_perceived)},
              {"advertised_amps", r.advertised_amps},
              {"ev_duty", r.ev_duty},
              {"ev_decoded_amps", r.ev_decoded_amps},
              {"drawn_amps", r.drawn_amps},
              {"contactor_closed", r.contactor_closed},
              {"attack_engaged", r.attack_engaged},
              {"latched", r.latched},
              {"soc", r.soc}};
}

}  // namespace

json to_json(const SimReport& r, const OutcomeSummary& o, bool with_trace) {
  const SimFlags& f = r.flags;
  json j{{"scenario", r.scenario},
         {"outcome", to_string(o.outcome)},
         {"summary", o.text},
         {"tick", r.tick},
         {"supply_volts", r.supply_volts},
         {"ticks", r.trace.size()},
         {"flags",
          {{"dos_communication_error", f.dos_communication_error},
           {"low_pilot_voltage_error", f.low_pilot_voltage_error},
           {"unsolicited_energization", f.unsolicited_energization},
           {"overcharge_past_limit", f.overcharge_past_limit},
           {"latched", f.latched},
           {"duty_attack_failed", f.duty_attack_failed}}},
         {"delivered_energy_kwh", r.delivered_energy_kwh},
         {"battery_energy_kwh", r.battery_energy_kwh},
         {"final_soc", r.final_soc},
         {"final_evse_state", state_str(r.final_evse_state)},
         {"final_ev_state", state_str(r.final_ev_state)}};
  if (o.outcome == Outcome::rate_reduced) {
    j["advertised_amps"] = o.advertised_amps;
    j["ev_amps"] = o.ev_amps;
  }
  if (with_trace) {
    json rows = json::array();
    for (const TraceRow& row : r.trace) rows.push_back(trace_row_json(row));
    j["trace"] = std::move(rows);
  }
  return j;
}

void write_trace_csv(std::ostream& out, const SimReport& r) {
  out << "t,v_evse,v_ev,evse_state,ev_state,ev_perceived,advertised_amps,"
         "ev_duty,ev_decoded_amps,drawn_amps,contactor_closed,attack_engaged,"
         "latched,soc\n";
  for (const TraceRow& x : r.trace)
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", x.t,
                       x.v_evse, x.v_ev, to_char(x.evse_state),
                       to_char(x.ev_state), to_char(x.ev_perceived),
                       x.advertised_amps, x.ev_duty, x.ev_decoded_amps,
                       x.drawn_amps, int(x.contactor_closed),
                       int(x.attack_engaged), int(x.latched), x.soc);
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "r_att,v_evse,v_ev,evse_state,ev_state,outcome\n";
  for (const SweepRow& r : rows)
    out << fmt::format("{},{},{},{},{},{}\n", r.r_att, r.v_evse, r.v_ev,
                       to_char(r.evse_state), to_char(r.ev_state),
                       to_string(r.outcome));
}

json to_json(const FeasibilityRange& r) {
  auto bound = [](const std::optional<Resistance>& b) {
    return b ? resistance_json(*b) : json(nullptr);
  };
  return json{{"attack", to_string(r.kind)},
              {"goal", to_string(r.goal)},
              {"r_min", bound(r.r_min)},
              {"r_max", bound(r.r_max)},
              {"empty", r.empty},
              {"notes", r.notes}};
}

json to_json(const SerialThresholds& t) {
  return json{{"attack", "serial"},
              {"goal", to_string(t.goal)},
              {"lambda", t.lambda},
              {"guaranteed", resistance_json(t.guaranteed)},
              {"ev_crossing", resistance_json(t.ev_crossing)},
              {"evse_crossing", resistance_json(t.evse_crossing)},
              {"range", to_json(t.range)}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace pilotsim::io
