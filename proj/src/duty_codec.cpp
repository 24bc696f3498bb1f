#include "pilotsim/duty_codec.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace pilotsim {

namespace {
constexpr double kLowSlope = 0.6;
constexpr double kHighSlope = 2.5;
constexpr double kHighOffset = 64.0;
constexpr double kKnee = 85.0;
constexpr double kCeiling = 96.0;
// Largest current of the low segment, and the infimum of the high one.
constexpr double kKneeAmpsLow = kKnee * kLowSlope;                   // 51
constexpr double kKneeAmpsHigh = (kKnee - kHighOffset) * kHighSlope;  // 52.5
}  // namespace

AmpacityReading duty_to_current(DutyCycle d) {
  const double p = d.percent();
  if (p < 3.0) return {DutyBand::invalid_low, 0.0};
  if (p <= 7.0) return {DutyBand::digital_comm, 0.0};
  if (p < 10.0) return {DutyBand::invalid_gap, 0.0};
  if (p <= kKnee) return {DutyBand::amps, p * kLowSlope};
  return {DutyBand::amps, (std::min(p, kCeiling) - kHighOffset) * kHighSlope};
}

DutyCycle current_to_duty(double amps) {
  if (!(amps >= kMinAmps && amps <= kMaxAmps))
    throw DomainError(
        fmt::format("{} A is outside the encodable range [6, 80] A", amps));
  if (amps <= kKneeAmpsLow) return DutyCycle(amps / kLowSlope);
  if (amps <= kKneeAmpsHigh)
    throw DomainError(fmt::format(
        "{} A falls in the (51, 52.5] A gap left by the 85 % knee", amps));
  return DutyCycle(amps / kHighSlope + kHighOffset);
}

std::string describe(const AmpacityReading& r) {
  switch (r.band) {
    case DutyBand::amps:
      return fmt::format("{:.4g} A", r.amps);
    case DutyBand::digital_comm:
      return "digital communication band";
    case DutyBand::invalid_low:
      return "invalid (below 3 %)";
    case DutyBand::invalid_gap:
      return "invalid (7-10 % gap)";
  }
  return "invalid";
}

}  // namespace pilotsim
