#pragma once

// PWM duty cycle <-> advertised supply current.

#include <stdexcept>
#include <string>

namespace pilotsim {

class DutyCycle {
 public:
  constexpr DutyCycle() = default;
  explicit DutyCycle(double percent) : percent_(percent) {
    if (!(percent >= 0.0 && percent <= 100.0))
      throw std::invalid_argument("duty cycle must be within [0, 100] %");
  }
  constexpr double percent() const { return percent_; }
  constexpr double fraction() const { return percent_ / 100.0; }

  friend auto operator<=>(const DutyCycle&, const DutyCycle&) = default;

 private:
  double percent_ = 0.0;
};

enum class DutyBand { amps, digital_comm, invalid_low, invalid_gap };

struct AmpacityReading {
  DutyBand band = DutyBand::invalid_low;
  double amps = 0.0;  // meaningful only for DutyBand::amps

  bool has_amps() const { return band == DutyBand::amps; }
};

/// Thrown for currents that have no duty-cycle encoding.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kMinAmps = 6.0;
inline constexpr double kMaxAmps = 80.0;

/// 10..85 % maps to 0.6 A/%, 85..96 % to 2.5*(d-64); above 96 % clamps to
/// 80 A; 3..7 % is the digital-communication band.
AmpacityReading duty_to_current(DutyCycle d);

/// Inverse of duty_to_current. Throws DomainError outside [6, 80] A and
/// for (51, 52.5] A, which the forward map never produces.
DutyCycle current_to_duty(double amps);

/// Amps the EV may draw for a reading; 0 when no current is advertised.
inline double advertised_amps(const AmpacityReading& r) {
  return r.has_amps() ? r.amps : 0.0;
}

std::string describe(const AmpacityReading& r);

}  // namespace pilotsim
