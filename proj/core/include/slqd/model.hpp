#pragma once

// Domain types shared by every module: qubit/sensor/pulse parameters, the
// Coulomb-peak shape, SNR summaries and the built-in donor presets.
//
// Units: times in seconds, frequencies in Hz, field in tesla, signal levels
// and noise densities in the digitizer's arbitrary units, gate voltages in mV.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace slqd {

namespace constants {
// e / (4 pi eps0) expressed in V nm: the potential 1 nm from one electron.
inline constexpr double kCoulombVoltNm = 1.439964547;
inline constexpr double kSiliconPermittivity = 11.7;
}  // namespace constants

struct QubitParams {
    std::string label;
    double t_out_up = 0.0;    // spin-up tunnel-out time
    double t_out_down = 0.0;  // spin-down tunnel-out time
    double t_in_down = 0.0;   // spin-down tunnel-in time (blip length)
    double t1 = 0.0;          // spin relaxation time
    // Stored for provenance only. Zeeman energetics are not modelled and no
    // computation reads this field.
    double b_z = 0.0;

    bool operator==(const QubitParams&) const = default;
};

enum class PeakForm { thermal_cosh2, lorentzian };

struct PeakShape {
    PeakForm form = PeakForm::thermal_cosh2;
    double height = 1.0;  // full contrast, signal units
    double fwhm = 1.54;   // gate mV
    double center = 0.0;  // gate mV

    bool operator==(const PeakShape&) const = default;
};

struct SensorParams {
    double mu_0 = 0.0;     // sensor level with the electron loaded
    double mu_1 = 0.0;     // sensor level with the electron absent
    double a_0 = 0.0;      // noise amplitude density at mu_0, per sqrt(Hz)
    double a_1 = 0.0;      // noise amplitude density at mu_1, per sqrt(Hz)
    double f_c = 0.0;      // first-order filter cutoff
    double gamma_s = 0.0;  // digitizer sample rate
    PeakShape peak;

    bool operator==(const SensorParams&) const = default;

    double amplitude() const;
    // +1 when mu_1 > mu_0, -1 otherwise.
    double orientation() const;
};

struct PulseSequence {
    double t_load = 0.0;
    double t_read = 0.0;
    double t_empty = 0.0;
    double read_level_offset = 0.0;  // gate mV, informational

    bool operator==(const PulseSequence&) const = default;
};

struct SnrReport {
    double amplitude = 0.0;
    double sigma = 0.0;
    double snr = 0.0;  // +inf when sigma == 0
    double tau_int = 0.0;
    double tau_min = 0.0;
    bool noiseless = false;

    bool operator==(const SnrReport&) const = default;
};

// Measured per-donor readout results kept next to the presets so reports can
// print expected values and deltas.
struct ReadoutReference {
    double t_opt = 0.0;
    double v_opt = 0.0;
    double f_stc_down = 0.0;
    double f_stc_up = 0.0;
    double f_e_down = 0.0;
    double f_e_up = 0.0;
    double f_down = 0.0;
    double f_up = 0.0;
    double f_m = 0.0;
    double distance_nm = 0.0;   // sensor distance
    double sensor_shift_mv = 0.0;
    double snr = 0.0;
    double tau_min = 0.0;
};

struct Preset {
    QubitParams qubit;
    SensorParams sensor;
    PulseSequence pulse;
    ReadoutReference reference;
};

// Default Coulomb-peak FWHM (mV). The measured peak width is not available;
// this value reproduces the 90 % fidelity range of a D3-like qubit.
inline constexpr double kDefaultPeakFwhm = 1.54;

// Throws ValidationError naming the first violated invariant.
void validate(const QubitParams& q);
void validate(const PeakShape& p);
void validate(const SensorParams& s);
void validate(const PulseSequence& p, const SensorParams& s);

// Peak function P(v); equals height at center and decays monotonically.
double peak_value(const PeakShape& p, double v);
// Half width at which P falls to `fraction` of height.
double peak_half_width_at(const PeakShape& p, double fraction);

std::vector<std::string> preset_names();
// Throws NotFoundError listing the valid names.
const Preset& preset(std::string_view name);

// Sensor-shift data points (distance nm, V_M mV) for the four device dots.
struct ShiftPoint {
    std::string label;
    double distance_nm;
    double v_m_mv;
};
const std::vector<ShiftPoint>& measured_sensor_shifts();

std::string to_string(PeakForm f);
PeakForm peak_form_from_string(std::string_view s);

void to_json(nlohmann::json& j, const QubitParams& v);
void from_json(const nlohmann::json& j, QubitParams& v);
void to_json(nlohmann::json& j, const PeakShape& v);
void from_json(const nlohmann::json& j, PeakShape& v);
void to_json(nlohmann::json& j, const SensorParams& v);
void from_json(const nlohmann::json& j, SensorParams& v);
void to_json(nlohmann::json& j, const PulseSequence& v);
void from_json(const nlohmann::json& j, PulseSequence& v);
void to_json(nlohmann::json& j, const SnrReport& v);
void from_json(const nlohmann::json& j, SnrReport& v);
void to_json(nlohmann::json& j, const ReadoutReference& v);

}  // namespace slqd
