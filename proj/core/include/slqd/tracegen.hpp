#pragma once

// Monte Carlo synthesis of single-shot readout traces: spin-dependent
// tunnelling and relaxation during the read phase, a two-level telegraph
// signal, white noise injected at the raw simulation rate, a first-order
// low-pass filter and decimation to the digitizer rate.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "slqd/model.hpp"

namespace slqd {

enum class Spin { down, up };

// Event times relative to the start of the read phase. Events that would
// happen after the read window are absent.
struct SpinEvents {
    Spin true_spin = Spin::down;
    std::optional<double> relaxed_at;
    std::optional<double> tunnel_out_at;
    std::optional<double> tunnel_in_at;

    bool has_blip() const { return tunnel_out_at.has_value(); }
    bool operator==(const SpinEvents&) const = default;
};

void validate(const SpinEvents& ev);

struct Trace {
    std::vector<float> samples;
    double sample_rate = 0.0;
    std::size_t read_start_index = 0;
    std::size_t read_end_index = 0;  // exclusive
    SpinEvents truth;
    std::uint64_t seed = 0;
    // Sensor that generated the samples; detection thresholds are checked
    // against its levels.
    SensorParams sensor;

    double time_of(std::size_t i) const { return static_cast<double>(i) / sample_rate; }
    std::span<const float> read_window() const;
};

// Sample bookkeeping shared by the synthesizer and its consumers.
struct TraceLayout {
    std::size_t total = 0;       // output samples
    std::size_t read_start = 0;
    std::size_t read_end = 0;    // exclusive
    std::size_t decimation = 1;  // raw samples per output sample
    double raw_rate = 0.0;
};

// Number of samples covering duration t at `rate`: ceil(t * rate), tolerant
// of floating-point round-off just above an integer.
std::size_t samples_for(double t, double rate);

// Raw rate is the smallest integer multiple of gamma_s that is >= 20 f_c.
TraceLayout trace_layout(const SensorParams& s, const PulseSequence& p);

// Competing exponential clocks for tunnelling and relaxation.
SpinEvents sample_spin_events(const QubitParams& q, const PulseSequence& p, Spin spin,
                              std::uint64_t rng_seed);

// Writes layout.total samples into `out` (resized). Deterministic in the seed.
TraceLayout synthesize_samples(const SpinEvents& ev, const SensorParams& s,
                               const PulseSequence& p, std::uint64_t rng_seed,
                               std::vector<float>& out);

Trace synthesize_trace(const SpinEvents& ev, const SensorParams& s, const PulseSequence& p,
                       std::uint64_t rng_seed);

struct Ensemble {
    QubitParams qubit;
    SensorParams sensor;
    PulseSequence pulse;
    std::uint64_t master_seed = 0;
    double up_fraction = 0.5;
    std::vector<Trace> traces;
};

// Seeds derived per trace index i:
//   trace seed  = stream_seed(master_seed, i)   (draws the spin label)
//   event seed  = stream_seed(trace seed, 0)
//   noise seed  = stream_seed(trace seed, 1)
std::uint64_t trace_event_seed(std::uint64_t trace_seed);
std::uint64_t trace_noise_seed(std::uint64_t trace_seed);

// Builds trace `index` of the ensemble defined by (q, s, p, up_fraction, master).
Trace generate_trace(const QubitParams& q, const SensorParams& s, const PulseSequence& p,
                     double up_fraction, std::uint64_t master_seed, std::size_t index);

// Throws EmptyEnsembleError for n_shots == 0. Output is independent of `threads`.
Ensemble generate_ensemble(const QubitParams& q, const SensorParams& s, const PulseSequence& p,
                           std::size_t n_shots, double up_fraction, std::uint64_t master_seed,
                           unsigned threads = 0);

}  // namespace slqd
