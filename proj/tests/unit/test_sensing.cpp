#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "slqd/errors.hpp"
#include "slqd/model.hpp"
#include "slqd/sensing.hpp"
#include "slqd/tracegen.hpp"

namespace slqd {
namespace {

TEST(TauMin, TabulatedSensorAndBenchmark) {
    EXPECT_NEAR(tau_min(66e-6, 9.6), 716e-9, 1e-9);
    EXPECT_NEAR(tau_min(66e-6, 9.6), 720e-9, 0.02 * 720e-9);
    EXPECT_NEAR(tau_min(100e-9, 12.7), 0.62e-9, 0.02 * 0.62e-9);
    EXPECT_DOUBLE_EQ(charge_sensitivity(1e-6), 1e-3);
}

TEST(TauMin, RejectsNonPositiveInputs) {
    EXPECT_THROW(tau_min(0.0, 1.0), DomainError);
    EXPECT_THROW(tau_min(1e-6, 0.0), DomainError);
    EXPECT_THROW(tau_min(1e-6, std::nan("")), DomainError);
    EXPECT_THROW(charge_sensitivity(-1.0), DomainError);
}

// Normal-equation slope of ln V against ln d, written out independently.
double ols_slope(const std::vector<DistancePoint>& pts) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(pts.size());
    for (const auto& p : pts) {
        const double x = std::log(p.distance_nm), y = std::log(p.v_m_mv);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

TEST(PowerLaw, MeasuredShiftsGiveAlphaNearOnePointFive) {
    const auto pts = to_distance_points(measured_sensor_shifts());
    const ScalingFit f = fit_power_law(pts);
    EXPECT_NEAR(f.alpha, -ols_slope(pts), 1e-12);
    EXPECT_NEAR(f.alpha, 1.4878, 1e-4);
    EXPECT_NEAR(std::log(f.prefactor), 7.92838, 1e-4);
    EXPECT_LT(std::abs(f.alpha - 1.4), std::hypot(f.alpha_err, 0.1));
    EXPECT_GT(f.residual, 0.0);
}

TEST(PowerLaw, NoiselessSyntheticRecoveredExactly) {
    for (double alpha : {0.7, 1.4, 3.0}) {
        std::vector<DistancePoint> pts;
        for (double d = 20; d <= 400; d *= 1.37) pts.push_back({d, 1234.5 / std::pow(d, alpha)});
        const ScalingFit f = fit_power_law(pts);
        EXPECT_NEAR(f.alpha, alpha, 1e-12);
        EXPECT_NEAR(f.prefactor / 1234.5, 1.0, 1e-11);
        EXPECT_NEAR(f.residual, 0.0, 1e-12);
        EXPECT_NEAR(f.alpha_err, 0.0, 1e-10);
        const ScalingFit g = fit_prefactor(pts, alpha);
        EXPECT_NEAR(g.prefactor / 1234.5, 1.0, 1e-12);
        EXPECT_NEAR(g.v_m(100.0), 1234.5 / std::pow(100.0, alpha), 1e-12);
    }
}

TEST(PowerLaw, ErrorPaths) {
    std::vector<DistancePoint> two{{10, 1}, {20, 0.5}};
    EXPECT_THROW(fit_power_law(two), DomainError);
    std::vector<DistancePoint> neg{{10, 1}, {20, -0.5}, {30, 0.2}};
    EXPECT_THROW(fit_power_law(neg), DomainError);
    std::vector<DistancePoint> same{{10, 1}, {10, 0.5}, {10, 0.2}};
    EXPECT_THROW(fit_power_law(same), DomainError);
    std::vector<DistancePoint> rising{{10, 1}, {20, 2}, {30, 3}};
    EXPECT_THROW(fit_power_law(rising), DomainError);
    EXPECT_THROW(fit_prefactor(rising, 0.0), DomainError);
    EXPECT_THROW(ScalingFit{}.v_m(-1.0), DomainError);
}

double brute_contrast(const PeakShape& p, double v_m) {
    double best = 0.0;
    for (int i = -200000; i <= 200000; ++i) {
        const double v = p.center + 1e-4 * i * p.fwhm;
        best = std::max(best, peak_value(p, v) - peak_value(p, v - v_m));
    }
    return best;
}

class ContrastForms : public ::testing::TestWithParam<PeakForm> {};

TEST_P(ContrastForms, MatchesBruteForceScan) {
    PeakShape p;
    p.form = GetParam();
    p.height = 0.8;
    p.fwhm = 1.5;
    p.center = -0.3;
    for (double v : {0.01, 0.2, 0.75, 1.5, 3.0, 12.0})
        EXPECT_NEAR(contrast(p, v), brute_contrast(p, v), 1e-6) << v;
    EXPECT_DOUBLE_EQ(contrast(p, 0.0), 0.0);
    EXPECT_LE(contrast(p, 1e3), p.height);
    EXPECT_THROW(contrast(p, -1.0), DomainError);
}

TEST_P(ContrastForms, MonotoneAndInvertible) {
    PeakShape p;
    p.form = GetParam();
    double prev = 0.0;
    for (int i = 1; i < 60; ++i) {
        const double c = contrast(p, 0.1 * i);
        EXPECT_GE(c, prev - 1e-12);
        prev = c;
    }
    for (double r : {0.05, 0.3, 0.5225, 0.9}) {
        const double v = shift_for_contrast_ratio(p, r);
        EXPECT_NEAR(contrast(p, v) / p.height, r, 1e-9);
    }
    EXPECT_DOUBLE_EQ(shift_for_contrast_ratio(p, 0.0), 0.0);
    EXPECT_THROW(shift_for_contrast_ratio(p, 1.0), DomainError);
}

INSTANTIATE_TEST_SUITE_P(Forms, ContrastForms,
                         ::testing::Values(PeakForm::thermal_cosh2, PeakForm::lorentzian));

TEST(Contrast, ScalesWithShiftOverWidth) {
    PeakShape a, b;
    a.fwhm = 1.0;
    b.fwhm = 2.5;
    EXPECT_NEAR(contrast(a, 0.7), contrast(b, 0.7 * 2.5), 1e-9);
}

TEST(StrongResponse, ThresholdIsRootOfPeakFraction) {
    PeakShape p;
    p.fwhm = 1.54;
    p.center = 2.0;
    const double v = strong_response_threshold(p, 0.01);
    EXPECT_NEAR(peak_value(p, p.center - v), 0.01 * p.height, 1e-12);
    // cosh^2 closed form: x = w acosh(10), w = fwhm / (2 acosh(sqrt 2)).
    const double w = p.fwhm / (2.0 * std::acosh(std::sqrt(2.0)));
    EXPECT_NEAR(v, w * std::acosh(10.0), 1e-12);
}

TEST(StrongResponse, ContourMarksNodesAboveThreshold) {
    VmMap m;
    m.grid = {0, 0, 1, 3, 1};
    m.values = {0.5, 3.0, 10.0};
    m.raw = m.values;
    PeakShape p;
    const BoolGrid g = strong_response_contour(m, p, 0.01);
    EXPECT_FALSE(g.at(0, 0));
    EXPECT_TRUE(g.at(1, 0));
    EXPECT_TRUE(g.at(2, 0));
}

TEST(SensorLevels, SecondLevelScalesLinearly) {
    const SensorParams& s = preset("D3").sensor;
    EXPECT_DOUBLE_EQ(mu1_at_distance(s, 2.0, 2.0), s.mu_1);
    EXPECT_DOUBLE_EQ(mu1_at_distance(s, 0.0, 2.0), s.mu_0);
    EXPECT_NEAR(mu1_at_distance(s, 0.5, 2.0), s.mu_0 + 0.25 * (s.mu_1 - s.mu_0), 1e-15);
    EXPECT_THROW(mu1_at_distance(s, 3.0, 2.0), DomainError);
    EXPECT_THROW(mu1_at_distance(s, 1.0, 0.0), DomainError);
    const SensorParams half = sensor_at_contrast(s, 0.5);
    EXPECT_NEAR(half.amplitude(), 0.5 * s.amplitude(), 1e-15);
    EXPECT_EQ(half.a_1, s.a_1);
}

TEST(FidelityAtContrast, ZeroContrastIsCoinToss) {
    const Preset& p = preset("D3");
    const auto r = fidelity_at_contrast(p.qubit, p.sensor, 0.0, 1000, 1);
    EXPECT_DOUBLE_EQ(r.f_m.value, 0.5);
}

TEST(DistanceCurve, FallsWithDistanceAndCrosses) {
    const Preset& p = preset("D3");
    const ScalingFit fit{2774.9, 1.4, 0.0, 0.0};
    const std::vector<double> d{20.0, 150.0, 300.0, 450.0};
    const DistanceCurve c = fidelity_vs_distance(p.qubit, p.sensor, fit, d, 2000, 3);
    ASSERT_EQ(c.fidelity.size(), d.size());
    for (std::size_t i = 1; i < d.size(); ++i) {
        EXPECT_LT(c.v_m[i], c.v_m[i - 1]);
        EXPECT_LE(c.fidelity[i], c.fidelity[i - 1] + 1e-9);
    }
    EXPECT_GT(c.fidelity.front(), 0.92);
    EXPECT_LT(c.fidelity.back(), 0.9);
    const std::vector<double> bad{10.0, 10.0};
    EXPECT_THROW(fidelity_vs_distance(p.qubit, p.sensor, fit, bad, 2000, 3), DomainError);
}

TEST(DistanceCurve, CrossingInterpolatesLinearly) {
    DistanceCurve c;
    c.distances = {10, 20, 30};
    c.fidelity = {0.95, 0.92, 0.86};
    EXPECT_NEAR(*crossing_distance(c, 0.90), 20.0 + 10.0 / 3.0, 1e-12);
    EXPECT_FALSE(crossing_distance(c, 0.80));
    EXPECT_DOUBLE_EQ(*crossing_distance(c, 0.96), 10.0);
}

TEST(Snr, MeasuredOnSimulatedTracesMatchesFilteredNoise) {
    const Preset& p = preset("D1");
    const Ensemble e = generate_ensemble(p.qubit, p.sensor, p.pulse, 400, 0.5, 12);
    const SnrReport r = measure_snr(e.traces);
    EXPECT_NEAR(r.amplitude, p.sensor.amplitude(), 0.02 * p.sensor.amplitude());
    const double a = 0.5 * (p.sensor.a_0 + p.sensor.a_1);
    const double sigma = a * std::sqrt(std::numbers::pi * p.sensor.f_c / 2.0);
    EXPECT_NEAR(r.sigma, sigma, 0.1 * sigma);
    EXPECT_DOUBLE_EQ(r.tau_int, 1.0 / p.sensor.f_c);
    EXPECT_NEAR(r.tau_min, tau_min(r.tau_int, r.snr), 1e-18);
    EXPECT_FALSE(r.noiseless);
}

TEST(Snr, NoiselessAndInconsistentInputs) {
    Preset p = preset("D2");
    p.sensor.a_0 = p.sensor.a_1 = std::numeric_limits<double>::denorm_min();
    Ensemble e = generate_ensemble(p.qubit, p.sensor, p.pulse, 10, 0.5, 1);
    const SnrReport r = measure_snr(e.traces);
    EXPECT_TRUE(r.noiseless);
    EXPECT_TRUE(std::isinf(r.snr));
    EXPECT_EQ(r.tau_min, 0.0);
    e.traces[1].sensor.mu_1 += 0.01;
    EXPECT_THROW(measure_snr(e.traces), InconsistencyError);
    std::vector<Trace> none;
    EXPECT_THROW(measure_snr(none), InsufficientDataError);
}

TEST(Csv, CurveHeaderAndRows) {
    DistanceCurve c;
    c.distances = {10};
    c.v_m = {1.5};
    c.contrast = {0.03};
    c.fidelity = {0.9};
    c.fidelity_err = {0.01};
    c.t_opt = {1e-3};
    std::ostringstream os;
    write_curve_csv(c, os);
    EXPECT_EQ(os.str(), "d_nm,vm_mV,contrast,f_m,f_m_err\n10,1.5,0.03,0.9,0.01\n");
}

TEST(Json, ScalingFitRoundTripAndValidation) {
    const ScalingFit f{100.0, 1.4, 0.1, 0.02};
    const ScalingFit g = nlohmann::json(f).get<ScalingFit>();
    EXPECT_EQ(g.prefactor, f.prefactor);
    EXPECT_EQ(g.alpha, f.alpha);
    EXPECT_THROW((nlohmann::json{{"prefactor", 1.0}, {"alpha", -1.0}}.get<ScalingFit>()), ValidationError);
}

}  // namespace
}  // namespace slqd
