#pragma once

// File formats: profile sets and scenarios in JSON, reports in JSON, traces
// and sweeps in CSV.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "pilotsim/analysis.hpp"
#include "pilotsim/attacks.hpp"
#include "pilotsim/sim.hpp"
#include "pilotsim/state.hpp"

namespace pilotsim::io {

// Insertion-ordered so emitted files keep a readable, stable key order.
using json = nlohmann::ordered_json;

/// Thrown for malformed or inconsistent input files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProfileSet {
  std::vector<ChargerProfile> chargers;
  std::vector<EvProfile> evs;

  /// Throw FormatError listing the known names when `name` is absent.
  const ChargerProfile& charger(std::string_view name) const;
  const EvProfile& ev(std::string_view name) const;
};

ProfileSet builtin_profiles();

/// {"chargers": {name: {...}}, "evs": {name: {...}}}. Entries start from the
/// bundled profile of the same name when there is one, otherwise from the
/// defaults, and override the fields they list. Unknown keys are rejected.
ProfileSet profiles_from_json(const json& j, const ProfileSet& base);
ProfileSet load_profiles(const std::filesystem::path& path,
                         const ProfileSet& base);
json profiles_to_json(const ProfileSet& set);

json to_json(const ChargerProfile& c);
json to_json(const EvProfile& e);
ChargerProfile charger_from_json(const json& j, ChargerProfile base);
EvProfile ev_from_json(const json& j, EvProfile base);

/// {"kind": "serial" | "parallel" | "automation" | "tlc555" | "fake_load",
///  ...parameters}. Resistances are numbers in ohms or "open".
AttackSpec attack_from_json(const json& j);
json to_json(const AttackSpec& a);

/// "charger" and "ev" are either a profile name or an object with an
/// optional "base" name plus field overrides.
Scenario scenario_from_json(const json& j, const ProfileSet& profiles);
Scenario load_scenario(const std::filesystem::path& path,
                       const ProfileSet& profiles);
json to_json(const Scenario& s);

/// Summary, flags and final states; the trace is included when asked for.
json to_json(const SimReport& r, const OutcomeSummary& o, bool with_trace);

/// Header: t,v_evse,v_ev,evse_state,ev_state,ev_perceived,advertised_amps,
/// ev_duty,ev_decoded_amps,drawn_amps,contactor_closed,attack_engaged,
/// latched,soc
void write_trace_csv(std::ostream& out, const SimReport& r);

/// Header: r_att,v_evse,v_ev,evse_state,ev_state,outcome
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

json to_json(const FeasibilityRange& r);
json to_json(const SerialThresholds& t);

json read_json_file(const std::filesystem::path& path);

}  // namespace pilotsim::io
