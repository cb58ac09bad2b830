#include "slqd/model.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "slqd/errors.hpp"

namespace slqd {

namespace {

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
}

// cosh^-2 half width parameter from the FWHM: P(w*acosh(sqrt 2)) = height/2.
double cosh2_scale(const PeakShape& p) {
    return p.fwhm / (2.0 * std::acosh(std::sqrt(2.0)));
}

Preset make_preset(QubitParams q, SensorParams s, ReadoutReference r) {
    s.peak.form = PeakForm::thermal_cosh2;
    s.peak.height = std::abs(s.mu_1 - s.mu_0);
    s.peak.fwhm = kDefaultPeakFwhm;
    s.peak.center = 0.0;
    PulseSequence p{.t_load = 1.0e-3, .t_read = r.t_opt, .t_empty = 1.0e-3,
                    .read_level_offset = 0.0};
    return Preset{std::move(q), s, p, r};
}

std::map<std::string, Preset, std::less<>> build_registry() {
    std::map<std::string, Preset, std::less<>> reg;

    reg.emplace("D1", make_preset(
        QubitParams{"D1", 65e-6, 7.9e-3, 15e-6, 1.5, 1.5},
        SensorParams{-0.0453, -0.0302, 1.02e-5, 1.08e-5, 80e3, 500e3, {}},
        ReadoutReference{.t_opt = 0.31e-3, .v_opt = -0.0322,
                         .f_stc_down = 0.961, .f_stc_up = 0.992,
                         .f_e_down = 0.953, .f_e_up = 0.691,
                         .f_down = 0.928, .f_up = 0.686, .f_m = 0.807,
                         .distance_nm = 55.0, .sensor_shift_mv = 7.1,
                         .snr = 4.0, .tau_min = 780e-9}));
    reg.emplace("D2", make_preset(
        QubitParams{"D2", 499e-6, 254e-3, 257e-6, 38e-3, 1.5},
        SensorParams{-0.0371, -0.0142, 2.67e-5, 2.72e-5, 15e3, 50e3, {}},
        ReadoutReference{.t_opt = 3.1e-3, .v_opt = -0.0196,
                         .f_stc_down = 0.988, .f_stc_up = 0.986,
                         .f_e_down = 0.991, .f_e_up = 0.929,
                         .f_down = 0.980, .f_up = 0.916, .f_m = 0.948,
                         .distance_nm = 66.0, .sensor_shift_mv = 5.4,
                         .snr = 9.6, .tau_min = 720e-9}));
    reg.emplace("D3", make_preset(
        QubitParams{"D3", 744e-6, 66e-3, 293e-6, 11.6, 1.5},
        SensorParams{-0.0986, -0.0623, 3.24e-5, 3.63e-5, 15e3, 50e3, {}},
        ReadoutReference{.t_opt = 3.4e-3, .v_opt = -0.0759,
                         .f_stc_down = 0.950, .f_stc_up = 0.989,
                         .f_e_down = 0.997, .f_e_up = 0.953,
                         .f_down = 0.949, .f_up = 0.943, .f_m = 0.946,
                         .distance_nm = 85.0, .sensor_shift_mv = 4.0,
                         .snr = 8.1, .tau_min = 1020e-9}));

    for (const auto& [name, p] : reg) {
        validate(p.qubit);
        validate(p.sensor);
        validate(p.pulse, p.sensor);
    }
    return reg;
}

const std::map<std::string, Preset, std::less<>>& registry() {
    static const auto reg = build_registry();
    return reg;
}

}  // namespace

double SensorParams::amplitude() const { return std::abs(mu_1 - mu_0); }

double SensorParams::orientation() const { return mu_1 > mu_0 ? 1.0 : -1.0; }

void validate(const QubitParams& q) {
    require(positive_finite(q.t_out_up), "t_out_up must be positive and finite");
    require(positive_finite(q.t_out_down), "t_out_down must be positive and finite");
    require(positive_finite(q.t_in_down), "t_in_down must be positive and finite");
    require(positive_finite(q.t1), "t1 must be positive and finite");
    require(q.t_out_up < q.t_out_down,
            "t_out_up must be shorter than t_out_down for spin-selective readout");
}

void validate(const PeakShape& p) {
    require(positive_finite(p.height), "peak height must be positive");
    require(positive_finite(p.fwhm), "peak fwhm must be positive");
    require(std::isfinite(p.center), "peak center must be finite");
}

void validate(const SensorParams& s) {
    require(std::isfinite(s.mu_0) && std::isfinite(s.mu_1), "sensor levels must be finite");
    require(s.mu_0 != s.mu_1, "mu_1 must differ from mu_0");
    require(positive_finite(s.a_0) && positive_finite(s.a_1),
            "noise densities a_0 and a_1 must be positive");
    require(positive_finite(s.f_c), "f_c must be positive");
    require(positive_finite(s.gamma_s), "gamma_s must be positive");
    require(s.gamma_s >= 2.0 * s.f_c, "gamma_s must be at least 2 f_c (Nyquist)");
    validate(s.peak);
}

void validate(const PulseSequence& p, const SensorParams& s) {
    require(positive_finite(p.t_load) && positive_finite(p.t_read) &&
                positive_finite(p.t_empty),
            "pulse durations must be positive");
    // Small slack so that e.g. 0.2 ms at 50 kHz counts as exactly 10 samples.
    require(p.t_read * s.gamma_s >= 10.0 - 1e-9,
            "t_read must cover at least 10 samples at gamma_s");
}

double peak_value(const PeakShape& p, double v) {
    const double x = v - p.center;
    switch (p.form) {
    case PeakForm::thermal_cosh2: {
        const double c = std::cosh(x / cosh2_scale(p));
        return std::isfinite(c) ? p.height / (c * c) : 0.0;
    }
    case PeakForm::lorentzian: {
        const double u = 2.0 * x / p.fwhm;
        return p.height / (1.0 + u * u);
    }
    }
    return 0.0;
}

double peak_half_width_at(const PeakShape& p, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw DomainError("peak fraction must lie in (0, 1]");
    switch (p.form) {
    case PeakForm::thermal_cosh2:
        return cosh2_scale(p) * std::acosh(1.0 / std::sqrt(fraction));
    case PeakForm::lorentzian:
        return 0.5 * p.fwhm * std::sqrt(1.0 / fraction - 1.0);
    }
    return 0.0;
}

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const auto& [name, p] : registry()) names.push_back(name);
    return names;
}

const Preset& preset(std::string_view name) {
    const auto& reg = registry();
    if (auto it = reg.find(name); it != reg.end()) return it->second;
    std::ostringstream msg;
    msg << "unknown preset '" << name << "'; valid presets:";
    for (const auto& n : preset_names()) msg << ' ' << n;
    throw NotFoundError(msg.str());
}

const std::vector<ShiftPoint>& measured_sensor_shifts() {
    static const std::vector<ShiftPoint> pts{
        {"D1", 55.0, 7.1}, {"D2", 66.0, 5.4}, {"D3", 85.0, 4.0}, {"D4", 93.0, 3.1}};
    return pts;
}

std::string to_string(PeakForm f) {
    return f == PeakForm::thermal_cosh2 ? "thermal-cosh2" : "lorentzian";
}

PeakForm peak_form_from_string(std::string_view s) {
    if (s == "thermal-cosh2") return PeakForm::thermal_cosh2;
    if (s == "lorentzian") return PeakForm::lorentzian;
    throw ValidationError("unknown peak form '" + std::string(s) +
                          "' (expected thermal-cosh2 or lorentzian)");
}

// ---- JSON ------------------------------------------------------------------

void to_json(nlohmann::json& j, const QubitParams& v) {
    j = {{"label", v.label},           {"t_out_up", v.t_out_up},
         {"t_out_down", v.t_out_down}, {"t_in_down", v.t_in_down},
         {"t1", v.t1},                 {"b_z", v.b_z}};
}

void from_json(const nlohmann::json& j, QubitParams& v) {
    v.label = j.value("label", std::string{});
    j.at("t_out_up").get_to(v.t_out_up);
    j.at("t_out_down").get_to(v.t_out_down);
    j.at("t_in_down").get_to(v.t_in_down);
    j.at("t1").get_to(v.t1);
    v.b_z = j.value("b_z", 0.0);
}

void to_json(nlohmann::json& j, const PeakShape& v) {
    j = {{"form", to_string(v.form)},
         {"height", v.height},
         {"fwhm", v.fwhm},
         {"center", v.center}};
}

void from_json(const nlohmann::json& j, PeakShape& v) {
    v.form = peak_form_from_string(j.value("form", std::string{"thermal-cosh2"}));
    j.at("height").get_to(v.height);
    // fwhm is required: the shipped default is only a calibration choice.
    j.at("fwhm").get_to(v.fwhm);
    v.center = j.value("center", 0.0);
}

void to_json(nlohmann::json& j, const SensorParams& v) {
    j = {{"mu_0", v.mu_0}, {"mu_1", v.mu_1},       {"a_0", v.a_0},
         {"a_1", v.a_1},   {"f_c", v.f_c},         {"gamma_s", v.gamma_s},
         {"peak", v.peak}};
}

void from_json(const nlohmann::json& j, SensorParams& v) {
    j.at("mu_0").get_to(v.mu_0);
    j.at("mu_1").get_to(v.mu_1);
    j.at("a_0").get_to(v.a_0);
    j.at("a_1").get_to(v.a_1);
    j.at("f_c").get_to(v.f_c);
    j.at("gamma_s").get_to(v.gamma_s);
    j.at("peak").get_to(v.peak);
}

void to_json(nlohmann::json& j, const PulseSequence& v) {
    j = {{"t_load", v.t_load},
         {"t_read", v.t_read},
         {"t_empty", v.t_empty},
         {"read_level_offset", v.read_level_offset}};
}

void from_json(const nlohmann::json& j, PulseSequence& v) {
    j.at("t_load").get_to(v.t_load);
    j.at("t_read").get_to(v.t_read);
    j.at("t_empty").get_to(v.t_empty);
    v.read_level_offset = j.value("read_level_offset", 0.0);
}

void to_json(nlohmann::json& j, const SnrReport& v) {
    j = {{"amplitude", v.amplitude},
         {"sigma", v.sigma},
         {"snr", std::isfinite(v.snr) ? nlohmann::json(v.snr) : nlohmann::json(nullptr)},
         {"tau_int", v.tau_int},
         {"tau_min", v.tau_min},
         {"noiseless", v.noiseless}};
}

void from_json(const nlohmann::json& j, SnrReport& v) {
    j.at("amplitude").get_to(v.amplitude);
    j.at("sigma").get_to(v.sigma);
    v.snr = j.at("snr").is_null() ? std::numeric_limits<double>::infinity()
                                  : j.at("snr").get<double>();
    j.at("tau_int").get_to(v.tau_int);
    j.at("tau_min").get_to(v.tau_min);
    v.noiseless = j.value("noiseless", false);
}

void to_json(nlohmann::json& j, const ReadoutReference& v) {
    j = {{"t_opt", v.t_opt},         {"v_opt", v.v_opt},
         {"f_stc_down", v.f_stc_down}, {"f_stc_up", v.f_stc_up},
         {"f_e_down", v.f_e_down},   {"f_e_up", v.f_e_up},
         {"f_down", v.f_down},       {"f_up", v.f_up},
         {"f_m", v.f_m},             {"distance_nm", v.distance_nm},
         {"sensor_shift_mv", v.sensor_shift_mv},
         {"snr", v.snr},             {"tau_min", v.tau_min}};
}

}  // namespace slqd
