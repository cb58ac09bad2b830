#include <benchmark/benchmark.h>

#include "slqd/electrostatics.hpp"
#include "slqd/model.hpp"
#include "slqd/readout.hpp"
#include "slqd/sensing.hpp"
#include "slqd/tracegen.hpp"

namespace {

using namespace slqd;

void BM_SynthesizeTrace(benchmark::State& state) {
    const Preset& p = preset("D2");
    std::uint64_t i = 0;
    for (auto _ : state) {
        Trace t = generate_trace(p.qubit, p.sensor, p.pulse, 0.5, 1, i++);
        benchmark::DoNotOptimize(t.samples.data());
    }
}
BENCHMARK(BM_SynthesizeTrace);

void BM_DetectBlip(benchmark::State& state) {
    const Preset& p = preset("D2");
    const Ensemble e = generate_ensemble(p.qubit, p.sensor, p.pulse, 256, 0.5, 3, 1);
    for (auto _ : state) {
        std::size_t n = 0;
        for (const Trace& t : e.traces) n += detect_blip(t, p.reference.v_opt).detected;
        benchmark::DoNotOptimize(n);
    }
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_DetectBlip);

void BM_ElectricalFidelityMc(benchmark::State& state) {
    const Preset& p = preset("D1");
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        auto fe = electrical_fidelity_mc(p.qubit, p.sensor, p.reference.v_opt, p.reference.t_opt, n, 7, 1);
        benchmark::DoNotOptimize(fe.up.value);
    }
}
BENCHMARK(BM_ElectricalFidelityMc)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_OptimizeReadout(benchmark::State& state) {
    const Preset& p = preset("D3");
    OptimizerOptions opts;
    opts.threads = 1;
    for (auto _ : state) {
        auto r = optimize_readout(p.qubit, p.sensor, 2000, 9, opts);
        benchmark::DoNotOptimize(r.f_m.value);
    }
}
BENCHMARK(BM_OptimizeReadout)->Unit(benchmark::kMillisecond);

void BM_Contrast(benchmark::State& state) {
    PeakShape peak;
    double v = 0.1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(contrast(peak, v));
        v = v > 5.0 ? 0.1 : v * 1.01;
    }
}
BENCHMARK(BM_Contrast);

void BM_BemSolve(benchmark::State& state) {
    DeviceGeometry g;
    g.panel_size = static_cast<double>(state.range(0));
    g.conductors = {{"S", {-12, -12, 12, 12}, ConductorRole::sensor_dot},
                    {"L", {-160, -20, -24, 20}, ConductorRole::gate_grounded},
                    {"G", {40, 30, 90, 60}, ConductorRole::gate_grounded}};
    for (auto _ : state) benchmark::DoNotOptimize(solve_mutual_energy(g, "S", Point2{80.0, 0.0}, 1));
}
BENCHMARK(BM_BemSolve)->Arg(4)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
