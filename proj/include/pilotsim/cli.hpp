#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pilotsim::cli {

// Process exit codes. Simulation outcomes other than "normal" get their own
// codes so scripts can branch on them.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDos = 10;
inline constexpr int kExitForcedCharging = 11;
inline constexpr int kExitErrorLatched = 12;
inline constexpr int kExitRateReduced = 13;

/// Runs one command line. `args` excludes the program name. Results go to
/// `out` unless an output path is given; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace pilotsim::cli
