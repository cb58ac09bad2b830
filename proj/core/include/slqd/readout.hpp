#pragma once

// Blip detection, spin-to-charge conversion (STC) and electrical detection
// fidelities, their combination into state fidelities, and the joint search
// for the measurement time and threshold that maximise the average fidelity.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "slqd/model.hpp"
#include "slqd/tracegen.hpp"

namespace slqd {

// A probability with its standard error.
struct Estimate {
    double value = 0.0;
    double err = 0.0;
};

struct FidelityReport {
    Estimate f_stc_down, f_stc_up;
    Estimate f_e_down, f_e_up;
    Estimate f_down, f_up, f_m;
    double t_opt = 0.0;
    double v_opt = 0.0;
    bool converged = true;
};

struct BlipDetection {
    bool detected = false;
    // Time of the first sample beyond threshold, relative to the read start.
    std::optional<double> first_crossing;
};

// Single-threshold maximum-value rule over the read window. The threshold
// must lie strictly between the generating sensor's two levels; crossing
// means "towards mu_1".
BlipDetection detect_blip(const Trace& t, double threshold);
// Same, restricted to the first `t_read` seconds of the read window.
BlipDetection detect_blip(const Trace& t, double threshold, double t_read);

struct StcFidelity {
    double down = 1.0;
    double up = 0.0;
};

// Closed form:
//   down = exp(-t / t_out_down)
//   up   = G_up / (G_up + G_1) * (1 - exp(-(G_up + G_1) t)),  G_up = 1/t_out_up, G_1 = 1/T1
StcFidelity stc_fidelity(const QubitParams& q, double t_read);

struct StateFidelities {
    double f_down = 0.0;
    double f_up = 0.0;
    double f_m = 0.0;
};

// f_down = stc_d e_d + (1 - stc_d)(1 - e_u)
// f_up   = stc_u e_u + (1 - stc_u)(1 - e_d)
// f_m    = (f_down + f_up) / 2
StateFidelities combine_fidelities(double f_stc_down, double f_stc_up, double f_e_down,
                                   double f_e_up);

struct ElectricalFidelity {
    Estimate down;
    Estimate up;
    std::size_t n_down = 0;
    std::size_t n_up = 0;
};

// Monte Carlo sample of detector responses. Holds n_mc traces without a tunnel
// event and n_mc traces that contain one blip (start drawn from the spin-up
// escape law truncated to [0, t_max), length with mean t_in_down). Each trace
// is reduced to the records of its running maximum so any window t <= t_max
// and any threshold can be evaluated without re-simulating.
class DetectionSampler {
public:
    DetectionSampler(const QubitParams& q, const SensorParams& s, double t_max, std::size_t n_mc,
                     std::uint64_t seed, unsigned threads = 0);

    double t_max() const { return t_max_; }
    const SensorParams& sensor() const { return sensor_; }

    ElectricalFidelity evaluate(double t_read, double threshold) const;

    struct ThresholdChoice {
        double threshold = 0.0;
        ElectricalFidelity electrical;
    };
    // Threshold in (mu_0, mu_1) maximising f_e_down + f_e_up at this window,
    // which maximises f_m whenever stc_down + stc_up > 1.
    ThresholdChoice best_threshold(double t_read) const;

private:
    struct Record {
        std::uint32_t index;
        float value;  // oriented so that larger means towards mu_1
    };
    struct Shot {
        std::vector<Record> records;
        double blip_start = 0.0;
    };

    std::size_t window_samples(double t_read) const;
    static float window_max(const Shot& shot, std::size_t m);
    std::vector<float> down_maxima(std::size_t m) const;
    std::vector<float> up_maxima(double t_read, std::size_t m) const;

    SensorParams sensor_;
    double t_max_;
    double orientation_;
    std::vector<Shot> down_;
    std::vector<Shot> up_;
};

// Monte Carlo electrical fidelities at one operating point. n_mc >= 1000.
ElectricalFidelity electrical_fidelity_mc(const QubitParams& q, const SensorParams& s,
                                          double threshold, double t_read, std::size_t n_mc,
                                          std::uint64_t seed, unsigned threads = 0);

// Full report at a fixed operating point (STC closed form + MC electrical).
FidelityReport compose_report(const QubitParams& q, double t_read, double threshold,
                              const ElectricalFidelity& fe);

struct OptimizerOptions {
    std::size_t grid_points = 24;
    std::size_t refine_points = 9;
    int max_refinements = 6;
    double tolerance = 1e-4;
    unsigned threads = 0;
};

// Search range for t_read: [t_out_up / 10, min(100 t_out_up, T1)].
std::pair<double, double> read_time_bounds(const QubitParams& q);

// Log-spaced grid over t_read refined around the best point; the threshold
// is optimised exactly on the Monte Carlo sample at every t_read. Long
// windows whose STC bound falls below the best fidelity found are pruned.
FidelityReport optimize_readout(const QubitParams& q, const SensorParams& s, std::size_t n_mc,
                                std::uint64_t seed, const OptimizerOptions& opts = {});

struct EnsembleAnalysis {
    // counts[truth][detected]; index 0 = down / no blip, 1 = up / blip.
    std::size_t counts[2][2] = {{0, 0}, {0, 0}};
    Estimate down_correct;  // P(no blip | down)
    Estimate up_correct;    // P(blip | up)
    Estimate f_m;
    double threshold = 0.0;
    double t_read = 0.0;
};

// Empirical confusion matrix. All traces must share one sensor
// (InconsistencyError otherwise) and both labels must be present.
EnsembleAnalysis analyze_ensemble(std::span<const Trace> traces, double threshold, double t_read);

void to_json(nlohmann::json& j, const FidelityReport& r);
void from_json(const nlohmann::json& j, FidelityReport& r);
void to_json(nlohmann::json& j, const EnsembleAnalysis& a);

}  // namespace slqd
