#include <gtest/gtest.h>

#include <cmath>

#include "slqd/errors.hpp"
#include "slqd/model.hpp"

namespace slqd {
namespace {

TEST(Presets, AllValidateAndAreListed) {
    const auto names = preset_names();
    ASSERT_EQ(names.size(), 3u);
    for (const auto& n : names) {
        const Preset& p = preset(n);
        EXPECT_EQ(p.qubit.label, n);
        EXPECT_NO_THROW(validate(p.qubit));
        EXPECT_NO_THROW(validate(p.sensor));
        EXPECT_NO_THROW(validate(p.pulse, p.sensor));
        EXPECT_DOUBLE_EQ(p.pulse.t_read, p.reference.t_opt);
    }
}

TEST(Presets, UnknownNameListsValidOnes) {
    try {
        preset("D9");
        FAIL();
    } catch (const NotFoundError& e) {
        EXPECT_NE(std::string(e.what()).find("D1"), std::string::npos);
    }
}

TEST(Presets, D2ReferenceValues) {
    const Preset& p = preset("D2");
    EXPECT_DOUBLE_EQ(p.qubit.t_out_up, 499e-6);
    EXPECT_DOUBLE_EQ(p.reference.t_opt, 3.1e-3);
    EXPECT_DOUBLE_EQ(p.reference.f_m, 0.948);
}

TEST(Validate, QubitRejectsNonSelectiveTunnelling) {
    QubitParams q = preset("D1").qubit;
    q.t_out_down = q.t_out_up;
    EXPECT_THROW(validate(q), ValidationError);
    q = preset("D1").qubit;
    q.t1 = -1.0;
    EXPECT_THROW(validate(q), ValidationError);
}

TEST(Validate, SensorRejectsEqualLevelsAndAliasing) {
    SensorParams s = preset("D2").sensor;
    s.mu_1 = s.mu_0;
    EXPECT_THROW(validate(s), ValidationError);
    s = preset("D2").sensor;
    s.gamma_s = 1.5 * s.f_c;
    EXPECT_THROW(validate(s), ValidationError);
    s = preset("D2").sensor;
    s.a_1 = 0.0;
    EXPECT_THROW(validate(s), ValidationError);
}

TEST(Validate, PulseNeedsTenReadSamples) {
    const Preset& p = preset("D2");
    PulseSequence pulse = p.pulse;
    pulse.t_read = 9.0 / p.sensor.gamma_s;
    EXPECT_THROW(validate(pulse, p.sensor), ValidationError);
    pulse.t_read = 10.0 / p.sensor.gamma_s;
    EXPECT_NO_THROW(validate(pulse, p.sensor));
}

class PeakForms : public ::testing::TestWithParam<PeakForm> {};

TEST_P(PeakForms, HeightAtCentreAndHalfMaximumAtHalfFwhm) {
    PeakShape p;
    p.form = GetParam();
    p.height = 2.5;
    p.fwhm = 1.3;
    p.center = 0.4;
    EXPECT_DOUBLE_EQ(peak_value(p, p.center), p.height);
    EXPECT_NEAR(peak_value(p, p.center + p.fwhm / 2.0), p.height / 2.0, 1e-12);
    EXPECT_NEAR(peak_value(p, p.center - p.fwhm / 2.0), p.height / 2.0, 1e-12);
    EXPECT_NEAR(peak_half_width_at(p, 0.5), p.fwhm / 2.0, 1e-12);
    EXPECT_DOUBLE_EQ(peak_half_width_at(p, 1.0), 0.0);
    const double w = peak_half_width_at(p, 0.01);
    EXPECT_NEAR(peak_value(p, p.center + w), 0.01 * p.height, 1e-12);
    EXPECT_THROW(peak_half_width_at(p, 0.0), DomainError);
}

TEST_P(PeakForms, MonotoneDecayAwayFromCentre) {
    PeakShape p;
    p.form = GetParam();
    double prev = peak_value(p, 0.0);
    for (int i = 1; i < 200; ++i) {
        const double v = peak_value(p, 0.05 * i);
        EXPECT_LT(v, prev);
        EXPECT_DOUBLE_EQ(v, peak_value(p, -0.05 * i));
        prev = v;
    }
}

INSTANTIATE_TEST_SUITE_P(Forms, PeakForms,
                         ::testing::Values(PeakForm::thermal_cosh2, PeakForm::lorentzian));

TEST(Json, SensorRoundTrip) {
    SensorParams s = preset("D3").sensor;
    s.peak.form = PeakForm::lorentzian;
    const nlohmann::json j = s;
    EXPECT_EQ(j.get<SensorParams>(), s);
    EXPECT_EQ(j.at("peak").at("form"), "lorentzian");
}

TEST(Json, QubitAndPulseRoundTrip) {
    const Preset& p = preset("D1");
    EXPECT_EQ(nlohmann::json(p.qubit).get<QubitParams>(), p.qubit);
    EXPECT_EQ(nlohmann::json(p.pulse).get<PulseSequence>(), p.pulse);
}

TEST(Json, UnknownPeakFormRejected) {
    EXPECT_THROW(peak_form_from_string("gaussian"), ValidationError);
}

}  // namespace
}  // namespace slqd
