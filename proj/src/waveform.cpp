#include "pilotsim/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

namespace pilotsim {

void PwmParams::validate() const {
  if (!(freq > 0.0)) throw std::invalid_argument("PWM frequency must be > 0");
  if (!(v_high > v_low))
    throw std::invalid_argument("PWM needs v_high > v_low");
}

namespace {

struct PwmLayout {
  double samples_per_period;
  long long high_count;
  std::size_t total;
};

PwmLayout layout_for(const PwmParams& p, double duration, double rate) {
  p.validate();
  if (!(rate >= kMinSamplesPerPeriod * p.freq))
    throw std::invalid_argument(fmt::format(
        "sample rate {} Hz is below 100 samples per {} Hz period", rate,
        p.freq));
  if (!(duration * p.freq >= 10.0 - 1e-9))
    throw std::invalid_argument("duration must cover at least 10 periods");
  PwmLayout l;
  l.samples_per_period = rate / p.freq;
  l.high_count = std::llround(p.duty.fraction() * l.samples_per_period);
  l.total = static_cast<std::size_t>(std::llround(duration * rate));
  return l;
}

// Value of sample n. Period k starts at round(k * samples_per_period).
double pwm_sample(const PwmParams& p, const PwmLayout& l, double rate,
                  std::size_t n) {
  const double idx = static_cast<double>(n);
  long long k = static_cast<long long>(std::floor(idx * p.freq / rate));
  long long offset = static_cast<long long>(n) -
                     std::llround(static_cast<double>(k) * l.samples_per_period);
  if (offset < 0) {
    --k;
    offset = static_cast<long long>(n) -
             std::llround(static_cast<double>(k) * l.samples_per_period);
  }
  return offset < l.high_count ? p.v_high : p.v_low;
}

double rectify_sample(double v, const DiodeModel& d) {
  if (v <= 0.0) return 0.0;
  return std::max(0.0, v - d.forward_drop);
}

}  // namespace

SampledSignal synthesize(const PwmParams& p, double duration, double rate) {
  const PwmLayout l = layout_for(p, duration, rate);
  SampledSignal s{rate, std::vector<double>(l.total)};
  const auto n_total = static_cast<long long>(l.total);
#pragma omp parallel for schedule(static)
  for (long long n = 0; n < n_total; ++n)
    s.samples[n] = pwm_sample(p, l, rate, static_cast<std::size_t>(n));
  return s;
}

SampledSignal rectify(const SampledSignal& in, const DiodeModel& d) {
  d.validate();
  SampledSignal out{in.sample_rate, std::vector<double>(in.samples.size())};
  const auto n_total = static_cast<long long>(in.samples.size());
#pragma omp parallel for schedule(static)
  for (long long n = 0; n < n_total; ++n)
    out.samples[n] = rectify_sample(in.samples[n], d);
  return out;
}

namespace serial {

SampledSignal synthesize(const PwmParams& p, double duration, double rate) {
  const PwmLayout l = layout_for(p, duration, rate);
  SampledSignal s{rate, {}};
  s.samples.reserve(l.total);
  for (std::size_t n = 0; n < l.total; ++n)
    s.samples.push_back(pwm_sample(p, l, rate, n));
  return s;
}

SampledSignal rectify(const SampledSignal& in, const DiodeModel& d) {
  d.validate();
  SampledSignal out{in.sample_rate, {}};
  out.samples.reserve(in.samples.size());
  for (double v : in.samples) out.samples.push_back(rectify_sample(v, d));
  return out;
}

}  // namespace serial

Measurement measure(const SampledSignal& s) {
  Measurement m;
  if (s.samples.empty()) return m;
  const auto [lo_it, hi_it] =
      std::minmax_element(s.samples.begin(), s.samples.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (hi - lo < 1e-12) {
    m.v_high = m.v_low = hi;
    m.duty = hi > 0.0 ? 100.0 : 0.0;
    return m;
  }

  const double mid = 0.5 * (hi + lo);
  double sum_hi = 0.0, sum_lo = 0.0;
  std::size_t n_hi = 0, n_lo = 0;
  std::vector<std::size_t> rising;
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    const double v = s.samples[i];
    if (v > mid) {
      sum_hi += v;
      ++n_hi;
    } else {
      sum_lo += v;
      ++n_lo;
    }
    if (i > 0 && s.samples[i - 1] <= mid && v > mid) rising.push_back(i);
  }
  m.v_high = sum_hi / static_cast<double>(n_hi);
  m.v_low = sum_lo / static_cast<double>(n_lo);

  if (rising.size() >= 2) {
    const std::size_t first = rising.front();
    const std::size_t last = rising.back();
    std::size_t above = 0;
    for (std::size_t i = first; i < last; ++i)
      if (s.samples[i] > mid) ++above;
    m.duty = 100.0 * static_cast<double>(above) /
             static_cast<double>(last - first);
    m.freq = static_cast<double>(rising.size() - 1) * s.sample_rate /
             static_cast<double>(last - first);
  } else {
    m.duty = 100.0 * static_cast<double>(n_hi) /
             static_cast<double>(s.samples.size());
  }
  return m;
}

SampledSignal rc_filter(const SampledSignal& s, const RcStage& stage,
                        std::optional<double> initial) {
  if (!(stage.tau > 0.0)) throw std::invalid_argument("RC tau must be > 0");
  if (s.dt() > stage.tau / 10.0 * (1.0 + 1e-12))
    throw std::invalid_argument(fmt::format(
        "sample period {} s is coarser than tau/10 = {} s", s.dt(),
        stage.tau / 10.0));
  SampledSignal out{s.sample_rate, std::vector<double>(s.samples.size())};
  if (s.samples.empty()) return out;
  const double alpha = -std::expm1(-s.dt() / stage.tau);
  double y = initial.value_or(s.samples.front());
  for (std::size_t n = 0; n < s.samples.size(); ++n) {
    out.samples[n] = y;
    y += (s.samples[n] - y) * alpha;
  }
  return out;
}

void write_csv(std::ostream& out, const SampledSignal& s) {
  out << "time,volts\n";
  for (std::size_t n = 0; n < s.samples.size(); ++n)
    out << fmt::format("{:.12g},{:.12g}\n", n * s.dt(), s.samples[n]);
}

SampledSignal read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("time,volts", 0) != 0)
    throw std::invalid_argument("signal CSV must start with 'time,volts'");
  std::vector<double> times;
  SampledSignal s;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::invalid_argument("malformed signal CSV row: " + line);
    times.push_back(std::stod(line.substr(0, comma)));
    s.samples.push_back(std::stod(line.substr(comma + 1)));
  }
  if (times.size() < 2)
    throw std::invalid_argument("signal CSV needs at least two samples");
  const double span = times.back() - times.front();
  if (!(span > 0.0)) throw std::invalid_argument("signal CSV time not increasing");
  double rate = static_cast<double>(times.size() - 1) / span;
  const double rounded = std::round(rate);
  if (std::abs(rate - rounded) <= 1e-6 * rate) rate = rounded;
  s.sample_rate = rate;
  return s;
}

}  // namespace pilotsim
