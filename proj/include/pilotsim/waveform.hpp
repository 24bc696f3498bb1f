#pragma once

// Sampled-signal layer: PWM synthesis, oscilloscope-style measurement, diode
// rectification and first-order RC filtering.

#include <iosfwd>
#include <optional>
#include <vector>

#include "pilotsim/circuit.hpp"
#include "pilotsim/duty_codec.hpp"

namespace pilotsim {

inline constexpr double kDefaultSampleRate = 1e6;
inline constexpr double kMinSamplesPerPeriod = 100.0;

struct PwmParams {
  double freq = 1000.0;
  DutyCycle duty{50.0};
  double v_high = 12.0;
  double v_low = -12.0;

  void validate() const;
  double period() const { return 1.0 / freq; }
};

struct SampledSignal {
  double sample_rate = kDefaultSampleRate;
  std::vector<double> samples;

  double dt() const { return 1.0 / sample_rate; }
  double duration() const { return samples.size() * dt(); }
};

struct RcStage {
  double tau = 1e-3;  // seconds
};

struct Measurement {
  double v_high = 0.0;
  double v_low = 0.0;
  double duty = 0.0;  // percent
  double freq = 0.0;  // 0 for DC
};

/// Ideal rectangular PWM; each period carries round(duty * samples/period)
/// high samples. Throws std::invalid_argument for fewer than 100 samples per
/// period or fewer than 10 periods.
SampledSignal synthesize(const PwmParams& p, double duration,
                         double rate = kDefaultSampleRate);

/// Levels are the means above / below the midlevel of the extremes; duty
/// and frequency are taken over whole periods between rising crossings.
/// A signal without crossings is reported as DC (duty 100 % above 0 V,
/// otherwise 0 %).
Measurement measure(const SampledSignal& s);

/// Negative samples to 0; positive ones reduced by the forward drop.
SampledSignal rectify(const SampledSignal& s, const DiodeModel& d);

/// y[n+1] = y[n] + (x[n] - y[n]) * (1 - exp(-dt/tau)), y[0] = initial or
/// x[0]. Requires dt <= tau / 10.
SampledSignal rc_filter(const SampledSignal& s, const RcStage& stage,
                        std::optional<double> initial = std::nullopt);

/// "time,volts" CSV with a header row.
void write_csv(std::ostream& out, const SampledSignal& s);
/// Reads the format written by write_csv; sample rate from the time column.
SampledSignal read_csv(std::istream& in);

namespace serial {
// Single-threaded references for the OpenMP kernels above.
SampledSignal synthesize(const PwmParams& p, double duration,
                         double rate = kDefaultSampleRate);
SampledSignal rectify(const SampledSignal& s, const DiodeModel& d);
}  // namespace serial

}  // namespace pilotsim
