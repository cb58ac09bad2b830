#pragma once

// Sensor figures of merit (tau_min, charge sensitivity, SNR), Coulomb-peak
// contrast as a function of the sensor shift V_M, power-law fits of V_M
// against distance, and readout fidelity as a function of qubit distance.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "json.hpp"
#include "slqd/electrostatics.hpp"
#include "slqd/model.hpp"
#include "slqd/readout.hpp"
#include "slqd/tracegen.hpp"

namespace slqd {

// tau_int / snr^2: integration time at which SNR reaches 1.
double tau_min(double tau_int, double snr);
// sqrt(tau_min), in e/sqrt(Hz) with the electron charge as unit.
double charge_sensitivity(double tau_min);

// Low level: read-window samples of traces without a tunnel-out event.
// High level: empty-phase samples once the filter has settled. The effective
// integration time is 1 / f_c. Throws InsufficientDataError if either level
// has fewer than two samples.
SnrReport measure_snr(std::span<const Trace> traces);

struct ScalingFit {
    double prefactor = 0.0;  // mV nm^alpha
    double alpha = 0.0;
    double alpha_err = 0.0;
    double residual = 0.0;   // rms of the log residuals

    // prefactor / d^alpha
    double v_m(double distance_nm) const;
};

struct DistancePoint {
    double distance_nm;
    double v_m_mv;
};

// Least squares on (ln d, ln V_M); alpha_err is the slope standard error.
ScalingFit fit_power_law(std::span<const DistancePoint> points);
// Prefactor only, with alpha held fixed (ln k = mean(ln V + alpha ln d)).
ScalingFit fit_prefactor(std::span<const DistancePoint> points, double alpha);
std::vector<DistancePoint> to_distance_points(std::span<const ShiftPoint> shifts);
std::vector<DistancePoint> to_distance_points(std::span<const DistanceSample> samples);

// max over bias V of P(V) - P(V - v_m).
double contrast(const PeakShape& peak, double v_m);

// mu_0 + (mu_1 - mu_0) * delta_v_d / delta_v_0.
double mu1_at_distance(const SensorParams& s, double delta_v_d, double delta_v_0);

// Sensor whose second level is scaled to `contrast_ratio` of the full excursion.
SensorParams sensor_at_contrast(const SensorParams& s, double contrast_ratio);

// Optimised readout with the sensor contrast reduced to `contrast_ratio`.
// A ratio of zero carries no information and returns F_M = 0.5.
FidelityReport fidelity_at_contrast(const QubitParams& q, const SensorParams& s,
                                    double contrast_ratio, std::size_t n_mc, std::uint64_t seed,
                                    const OptimizerOptions& opts = {});

struct DistanceCurve {
    std::vector<double> distances;  // nm, strictly increasing
    std::vector<double> v_m;        // mV
    std::vector<double> contrast;   // signal units
    std::vector<double> fidelity;
    std::vector<double> fidelity_err;
    std::vector<double> t_opt;
};

DistanceCurve fidelity_vs_distance(const QubitParams& q, const SensorParams& s,
                                   const ScalingFit& fit, std::span<const double> distances,
                                   std::size_t n_mc, std::uint64_t seed,
                                   const OptimizerOptions& opts = {});

// First distance at which the curve drops below `level`, linearly
// interpolated; nullopt if it never does.
std::optional<double> crossing_distance(const DistanceCurve& c, double level);

// Smallest contrast ratio whose optimised F_M reaches `target` (bisection on
// common random numbers). Throws DomainError if full contrast falls short.
double contrast_ratio_for_fidelity(const QubitParams& q, const SensorParams& s, double target,
                                   std::size_t n_mc, std::uint64_t seed,
                                   const OptimizerOptions& opts = {}, double tolerance = 1e-3);

// Smallest shift whose contrast reaches `ratio` of the peak height.
double shift_for_contrast_ratio(const PeakShape& peak, double ratio);

// Peak FWHM (mV) that places the `target` fidelity crossing at `distance_nm`
// on the curve of `fit`. The peak form and height of `s` are kept.
double calibrate_peak_fwhm(const QubitParams& q, const SensorParams& s, const ScalingFit& fit,
                           double distance_nm, double target, std::size_t n_mc,
                           std::uint64_t seed, const OptimizerOptions& opts = {});

// V_M* with P(center - V_M*) = fraction * height.
double strong_response_threshold(const PeakShape& peak, double fraction = 0.01);

struct BoolGrid {
    GridSpec grid;
    std::vector<bool> values;  // row-major like VmMap

    bool at(std::size_t ix, std::size_t iy) const { return values[iy * grid.nx + ix]; }
};

// True where the shift moves the peak top below `fraction` of its height.
BoolGrid strong_response_contour(const VmMap& map, const PeakShape& peak, double fraction = 0.01);

void to_json(nlohmann::json& j, const ScalingFit& f);
void from_json(const nlohmann::json& j, ScalingFit& f);
// Header: d_nm,vm_mV,contrast,f_m,f_m_err
void write_curve_csv(const DistanceCurve& c, std::ostream& os);

}  // namespace slqd
