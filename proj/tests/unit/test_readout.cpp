#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "slqd/errors.hpp"
#include "slqd/model.hpp"
#include "slqd/readout.hpp"
#include "slqd/tracegen.hpp"

namespace slqd {
namespace {

// Reference component and combined fidelities per preset.
struct TableRow {
    const char* name;
    double stc_d, stc_u, e_d, e_u, f_d, f_u, f_m;
};
constexpr TableRow kTable[] = {
    {"D1", 0.961, 0.992, 0.953, 0.691, 0.928, 0.686, 0.807},
    {"D2", 0.988, 0.986, 0.991, 0.929, 0.980, 0.916, 0.948},
    {"D3", 0.950, 0.989, 0.997, 0.953, 0.949, 0.943, 0.946},
};

TEST(Combine, ReproducesTabulatedStateFidelities) {
    for (const auto& r : kTable) {
        const auto f = combine_fidelities(r.stc_d, r.stc_u, r.e_d, r.e_u);
        EXPECT_NEAR(f.f_down, r.f_d, 1e-3) << r.name;
        EXPECT_NEAR(f.f_up, r.f_u, 1e-3) << r.name;
        EXPECT_NEAR(f.f_m, r.f_m, 1e-3) << r.name;
    }
}

TEST(Combine, PerfectAndUselessLimits) {
    const auto perfect = combine_fidelities(1, 1, 1, 1);
    EXPECT_DOUBLE_EQ(perfect.f_m, 1.0);
    const auto blind = combine_fidelities(0.9, 0.8, 1.0, 0.0);
    EXPECT_DOUBLE_EQ(blind.f_m, 0.5);
    EXPECT_THROW(combine_fidelities(1.1, 1, 1, 1), DomainError);
    EXPECT_THROW(combine_fidelities(1, 1, 1, -0.1), DomainError);
}

TEST(Stc, ReproducesTabulatedValuesFromTimesAlone) {
    for (const auto& r : kTable) {
        const Preset& p = preset(r.name);
        const StcFidelity s = stc_fidelity(p.qubit, p.reference.t_opt);
        EXPECT_NEAR(s.down, r.stc_d, 3e-3) << r.name;
        EXPECT_NEAR(s.up, r.stc_u, 3e-3) << r.name;
    }
}

TEST(Stc, LongWindowLimits) {
    const QubitParams& q = preset("D2").qubit;
    const StcFidelity s = stc_fidelity(q, 100.0);
    EXPECT_NEAR(s.down, 0.0, 1e-12);
    EXPECT_NEAR(s.up, (1.0 / q.t_out_up) / (1.0 / q.t_out_up + 1.0 / q.t1), 1e-12);
    EXPECT_THROW(stc_fidelity(q, 0.0), DomainError);
}

Trace step_trace(double mu_0, double mu_1, std::size_t start, std::size_t len) {
    Trace t;
    t.sensor = preset("D2").sensor;
    t.sensor.mu_0 = mu_0;
    t.sensor.mu_1 = mu_1;
    t.sample_rate = 1e4;
    t.samples.assign(40, static_cast<float>(mu_0));
    t.read_start_index = 10;
    t.read_end_index = 30;
    for (std::size_t i = start; i < start + len; ++i) t.samples[i] = static_cast<float>(mu_1);
    return t;
}

TEST(Detect, FindsFirstCrossingInEitherOrientation) {
    for (auto [lo, hi] : {std::pair{0.0, 1.0}, std::pair{1.0, 0.0}}) {
        const Trace t = step_trace(lo, hi, 15, 3);
        const auto d = detect_blip(t, 0.5);
        EXPECT_TRUE(d.detected);
        ASSERT_TRUE(d.first_crossing);
        EXPECT_NEAR(*d.first_crossing, 5e-4, 1e-12);
        EXPECT_FALSE(detect_blip(t, 0.5, 4e-4).detected);
        EXPECT_TRUE(detect_blip(t, 0.5, 6e-4).detected);
    }
}

TEST(Detect, IgnoresExcursionsOutsideReadWindow) {
    const Trace t = step_trace(0.0, 1.0, 32, 5);
    EXPECT_FALSE(detect_blip(t, 0.5).detected);
}

TEST(Detect, ThresholdMustLieBetweenLevels) {
    const Trace t = step_trace(0.0, 1.0, 15, 3);
    EXPECT_THROW(detect_blip(t, 1.5), DomainError);
    EXPECT_THROW(detect_blip(t, 0.0), DomainError);
}

TEST(MonteCarlo, RejectsTooFewShots) {
    const Preset& p = preset("D2");
    EXPECT_THROW(electrical_fidelity_mc(p.qubit, p.sensor, p.reference.v_opt, p.reference.t_opt, 999, 1),
                 DomainError);
}

TEST(MonteCarlo, IndependentOfThreadCount) {
    const Preset& p = preset("D1");
    const auto a = electrical_fidelity_mc(p.qubit, p.sensor, p.reference.v_opt, p.reference.t_opt, 2000, 5, 1);
    const auto b = electrical_fidelity_mc(p.qubit, p.sensor, p.reference.v_opt, p.reference.t_opt, 2000, 5, 3);
    EXPECT_EQ(a.down.value, b.down.value);
    EXPECT_EQ(a.up.value, b.up.value);
}

TEST(MonteCarlo, StandardErrorHalvesWithFourTimesTheShots) {
    const Preset& p = preset("D1");
    const auto a = electrical_fidelity_mc(p.qubit, p.sensor, p.reference.v_opt, p.reference.t_opt, 2000, 8);
    const auto b = electrical_fidelity_mc(p.qubit, p.sensor, p.reference.v_opt, p.reference.t_opt, 8000, 8);
    EXPECT_NEAR(a.up.err / b.up.err, 2.0, 0.6);
    EXPECT_NEAR(a.down.err / b.down.err, 2.0, 0.6);
}

TEST(MonteCarlo, ComposeReportUsesClosedFormStc) {
    const Preset& p = preset("D3");
    ElectricalFidelity fe;
    fe.down = {0.997, 0.001};
    fe.up = {0.953, 0.002};
    const FidelityReport r = compose_report(p.qubit, p.reference.t_opt, p.reference.v_opt, fe);
    EXPECT_NEAR(r.f_m.value, 0.946, 2e-3);
    EXPECT_GT(r.f_m.err, 0.0);
    EXPECT_DOUBLE_EQ(r.t_opt, p.reference.t_opt);
}

TEST(Sampler, BestThresholdLiesBetweenLevelsAndBeatsMidpoint) {
    const Preset& p = preset("D1");
    const DetectionSampler s(p.qubit, p.sensor, 1e-3, 2000, 3);
    const auto choice = s.best_threshold(p.reference.t_opt);
    const double lo = std::min(p.sensor.mu_0, p.sensor.mu_1), hi = std::max(p.sensor.mu_0, p.sensor.mu_1);
    EXPECT_GT(choice.threshold, lo);
    EXPECT_LT(choice.threshold, hi);
    const auto mid = s.evaluate(p.reference.t_opt, 0.5 * (lo + hi));
    EXPECT_GE(choice.electrical.down.value + choice.electrical.up.value,
              mid.down.value + mid.up.value - 1e-12);
    EXPECT_THROW(s.evaluate(2e-3, 0.5 * (lo + hi)), DomainError);
}

TEST(Optimizer, BoundsAndQualityForD2) {
    const Preset& p = preset("D2");
    const auto [lo, hi] = read_time_bounds(p.qubit);
    EXPECT_DOUBLE_EQ(lo, p.qubit.t_out_up / 10.0);
    EXPECT_DOUBLE_EQ(hi, std::min(100.0 * p.qubit.t_out_up, p.qubit.t1));
    const FidelityReport r = optimize_readout(p.qubit, p.sensor, 2000, 4);
    EXPECT_GE(r.t_opt, lo);
    EXPECT_LE(r.t_opt, hi);
    const auto fe = electrical_fidelity_mc(p.qubit, p.sensor, p.reference.v_opt, p.reference.t_opt, 2000, 4);
    const auto at_ref = compose_report(p.qubit, p.reference.t_opt, p.reference.v_opt, fe);
    EXPECT_GE(r.f_m.value, at_ref.f_m.value - 0.005);
    EXPECT_THROW(optimize_readout(p.qubit, p.sensor, 0, 4), DomainError);
}

TEST(Analyze, NoiselessEnsembleReadsTruthAfterStc) {
    Preset p = preset("D2");
    p.sensor.a_0 = p.sensor.a_1 = 1e-30;
    const Ensemble e = generate_ensemble(p.qubit, p.sensor, p.pulse, 400, 0.5, 21);
    const auto a = analyze_ensemble(e.traces, p.reference.v_opt, p.pulse.t_read);
    // A blip is certain to be seen once the filtered step has time to cross
    // the threshold and be sampled.
    const double tau = 1.0 / (2.0 * std::numbers::pi * p.sensor.f_c);
    const double min_width = 3.0 * tau + 2.0 / p.sensor.gamma_s;
    std::size_t down_blips = 0, up_blips = 0, up_wide = 0;
    for (const auto& t : e.traces) {
        const bool up = t.truth.true_spin == Spin::up;
        (up ? up_blips : down_blips) += t.truth.has_blip();
        if (up && t.truth.has_blip() && *t.truth.tunnel_out_at + min_width < p.pulse.t_read &&
            t.truth.tunnel_in_at.value_or(1e9) - *t.truth.tunnel_out_at > min_width)
            ++up_wide;
    }
    EXPECT_LE(a.counts[0][1], down_blips);
    EXPECT_LE(a.counts[1][1], up_blips);
    EXPECT_GE(a.counts[1][1], up_wide);
    EXPECT_NEAR(a.f_m.value, 0.5 * (a.down_correct.value + a.up_correct.value), 1e-15);
}

TEST(Analyze, ErrorPaths) {
    const Preset& p = preset("D2");
    std::vector<Trace> none;
    EXPECT_THROW(analyze_ensemble(none, p.reference.v_opt, p.pulse.t_read), EmptyEnsembleError);
    Ensemble e = generate_ensemble(p.qubit, p.sensor, p.pulse, 20, 0.0, 1);
    EXPECT_THROW(analyze_ensemble(e.traces, p.reference.v_opt, p.pulse.t_read), InsufficientDataError);
    e = generate_ensemble(p.qubit, p.sensor, p.pulse, 20, 0.5, 1);
    e.traces[3].sensor.f_c *= 2.0;
    EXPECT_THROW(analyze_ensemble(e.traces, p.reference.v_opt, p.pulse.t_read), InconsistencyError);
}

}  // namespace
}  // namespace slqd
