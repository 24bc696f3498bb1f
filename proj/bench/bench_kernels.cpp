// OpenMP kernels against their single-threaded references.

#include <benchmark/benchmark.h>

#include "pilotsim/analysis.hpp"
#include "pilotsim/state.hpp"
#include "pilotsim/waveform.hpp"

namespace {

using namespace pilotsim;

const PwmParams kPwm{1000.0, DutyCycle(26.5), 12.0, -12.0};

template <auto Fn>
void bm_sweep(benchmark::State& st) {
  const auto grid = linear_grid(0.0, 10000.0, static_cast<std::size_t>(st.range(0)));
  const auto ch = charger2_profile();
  const auto ev = tesla_model3_profile();
  for (auto _ : st) benchmark::DoNotOptimize(Fn(AttackKind::parallel, grid, ch, ev, ChargingState::B));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

template <auto Fn>
void bm_synthesize(benchmark::State& st) {
  const double duration = static_cast<double>(st.range(0)) * 1e-3;
  for (auto _ : st) benchmark::DoNotOptimize(Fn(kPwm, duration, kDefaultSampleRate));
  st.SetItemsProcessed(st.iterations() * static_cast<long>(duration * kDefaultSampleRate));
}

template <auto Fn>
void bm_rectify(benchmark::State& st) {
  const auto sig = synthesize(kPwm, static_cast<double>(st.range(0)) * 1e-3);
  const DiodeModel d{0.7, true};
  for (auto _ : st) benchmark::DoNotOptimize(Fn(sig, d));
  st.SetItemsProcessed(st.iterations() * static_cast<long>(sig.samples.size()));
}

}  // namespace

using SweepFn = std::vector<pilotsim::SweepRow> (*)(pilotsim::AttackKind, std::span<const double>,
                                                    const pilotsim::ChargerProfile&,
                                                    const pilotsim::EvProfile&,
                                                    pilotsim::ChargingState);
using SynthFn = pilotsim::SampledSignal (*)(const pilotsim::PwmParams&, double, double);
using RectFn = pilotsim::SampledSignal (*)(const pilotsim::SampledSignal&,
                                           const pilotsim::DiodeModel&);

constexpr SweepFn kSweepOmp = &pilotsim::sweep;
constexpr SweepFn kSweepRef = &pilotsim::serial::sweep;
constexpr SynthFn kSynthOmp = &pilotsim::synthesize;
constexpr SynthFn kSynthRef = &pilotsim::serial::synthesize;
constexpr RectFn kRectOmp = &pilotsim::rectify;
constexpr RectFn kRectRef = &pilotsim::serial::rectify;

BENCHMARK(bm_sweep<kSweepOmp>)->Name("sweep/openmp")->Arg(10001)->Arg(100001);
BENCHMARK(bm_sweep<kSweepRef>)->Name("sweep/serial")->Arg(10001)->Arg(100001);
BENCHMARK(bm_synthesize<kSynthOmp>)->Name("synthesize/openmp")->Arg(50)->Arg(500);
BENCHMARK(bm_synthesize<kSynthRef>)->Name("synthesize/serial")->Arg(50)->Arg(500);
BENCHMARK(bm_rectify<kRectOmp>)->Name("rectify/openmp")->Arg(50)->Arg(500);
BENCHMARK(bm_rectify<kRectRef>)->Name("rectify/serial")->Arg(50)->Arg(500);

BENCHMARK_MAIN();
