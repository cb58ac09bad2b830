#include "slqd/tracegen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "slqd/errors.hpp"
#include "slqd/parallel.hpp"
#include "slqd/random.hpp"

namespace slqd {

namespace {

struct Segment {
    std::size_t end;  // exclusive raw index
    double level;
    double sigma;
};

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

std::span<const float> Trace::read_window() const {
    if (read_start_index > read_end_index || read_end_index > samples.size())
        throw MalformedTraceError("read window indices out of bounds");
    return std::span<const float>(samples).subspan(read_start_index,
                                                   read_end_index - read_start_index);
}

void validate(const SpinEvents& ev) {
    if (ev.tunnel_in_at && !ev.tunnel_out_at)
        throw ValidationError("tunnel_in_at requires tunnel_out_at");
    if (ev.tunnel_in_at && ev.tunnel_out_at && !(*ev.tunnel_in_at > *ev.tunnel_out_at))
        throw ValidationError("tunnel_in_at must follow tunnel_out_at");
    if (ev.relaxed_at && ev.true_spin != Spin::up)
        throw ValidationError("relaxed_at is only meaningful for spin up");
}

std::size_t samples_for(double t, double rate) {
    const double x = t * rate;
    const double r = std::round(x);
    if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<std::size_t>(r);
    return static_cast<std::size_t>(std::ceil(x));
}

TraceLayout trace_layout(const SensorParams& s, const PulseSequence& p) {
    TraceLayout l;
    l.decimation = std::max<std::size_t>(1, samples_for(20.0 * s.f_c / s.gamma_s, 1.0));
    l.raw_rate = s.gamma_s * static_cast<double>(l.decimation);
    l.total = samples_for(p.t_load + p.t_read + p.t_empty, s.gamma_s);
    l.read_start = samples_for(p.t_load, s.gamma_s);
    l.read_end = std::min(l.total, samples_for(p.t_load + p.t_read, s.gamma_s));
    return l;
}

SpinEvents sample_spin_events(const QubitParams& q, const PulseSequence& p, Spin spin,
                              std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    SpinEvents ev;
    ev.true_spin = spin;
    const double window = p.t_read;

    double escape = 0.0;
    if (spin == Spin::up) {
        const double tunnel = draw_exponential(rng, q.t_out_up);
        const double relax = draw_exponential(rng, q.t1);
        if (tunnel < relax) {
            escape = tunnel;
        } else {
            if (relax < window) ev.relaxed_at = relax;
            escape = relax + draw_exponential(rng, q.t_out_down);
        }
    } else {
        escape = draw_exponential(rng, q.t_out_down);
    }
    const double dwell = draw_exponential(rng, q.t_in_down);

    if (escape < window) {
        ev.tunnel_out_at = escape;
        if (escape + dwell < window) ev.tunnel_in_at = escape + dwell;
    }
    return ev;
}

TraceLayout synthesize_samples(const SpinEvents& ev, const SensorParams& s,
                               const PulseSequence& p, std::uint64_t rng_seed,
                               std::vector<float>& out) {
    const TraceLayout l = trace_layout(s, p);
    out.resize(l.total);
    if (l.total == 0) return l;

    const double rate = l.raw_rate;
    const double sigma0 = s.a_0 * std::sqrt(rate / 2.0);
    const double sigma1 = s.a_1 * std::sqrt(rate / 2.0);
    const std::size_t raw_count = (l.total - 1) * l.decimation + 1;
    auto raw_index = [&](double t) { return std::min(raw_count, samples_for(t, rate)); };

    const double read_begin = p.t_load;
    const double read_end = p.t_load + p.t_read;
    std::vector<Segment> segs;
    segs.reserve(5);
    if (ev.tunnel_out_at) {
        const double b0 = read_begin + *ev.tunnel_out_at;
        const double b1 = ev.tunnel_in_at ? read_begin + *ev.tunnel_in_at : read_end;
        segs.push_back({raw_index(b0), s.mu_0, sigma0});
        segs.push_back({raw_index(b1), s.mu_1, sigma1});
    }
    segs.push_back({raw_index(read_end), s.mu_0, sigma0});
    segs.push_back({raw_count, s.mu_1, sigma1});

    const double a = 1.0 - std::exp(-2.0 * std::numbers::pi * s.f_c / rate);
    Rng rng(rng_seed);
    std::normal_distribution<double> normal;

    // Start from the stationary filtered state at mu_0.
    double y = s.mu_0 + sigma0 * std::sqrt(a / (2.0 - a)) * normal(rng);
    std::size_t r = 0;
    std::size_t phase = 0;  // r mod decimation
    std::size_t n = 0;
    for (const Segment& seg : segs) {
        const double level = seg.level;
        const double sigma = seg.sigma;
        for (; r < seg.end; ++r) {
            y += a * (level + sigma * normal(rng) - y);
            if (phase == 0) out[n++] = static_cast<float>(y);
            if (++phase == l.decimation) phase = 0;
        }
    }
    return l;
}

Trace synthesize_trace(const SpinEvents& ev, const SensorParams& s, const PulseSequence& p,
                       std::uint64_t rng_seed) {
    validate(ev);
    Trace t;
    const TraceLayout l = synthesize_samples(ev, s, p, rng_seed, t.samples);
    t.sample_rate = s.gamma_s;
    t.read_start_index = l.read_start;
    t.read_end_index = l.read_end;
    t.truth = ev;
    t.seed = rng_seed;
    t.sensor = s;
    return t;
}

std::uint64_t trace_event_seed(std::uint64_t trace_seed) { return stream_seed(trace_seed, 0); }

std::uint64_t trace_noise_seed(std::uint64_t trace_seed) { return stream_seed(trace_seed, 1); }

Trace generate_trace(const QubitParams& q, const SensorParams& s, const PulseSequence& p,
                     double up_fraction, std::uint64_t master_seed, std::size_t index) {
    const std::uint64_t seed = stream_seed(master_seed, index);
    Rng label_rng(seed);
    const Spin spin = uniform01(label_rng) < up_fraction ? Spin::up : Spin::down;
    const SpinEvents ev = sample_spin_events(q, p, spin, trace_event_seed(seed));
    Trace t = synthesize_trace(ev, s, p, trace_noise_seed(seed));
    t.seed = seed;
    return t;
}

Ensemble generate_ensemble(const QubitParams& q, const SensorParams& s, const PulseSequence& p,
                           std::size_t n_shots, double up_fraction, std::uint64_t master_seed,
                           unsigned threads) {
    if (n_shots == 0) throw EmptyEnsembleError("an ensemble needs at least one shot");
    if (!(up_fraction >= 0.0 && up_fraction <= 1.0))
        throw DomainError("up_fraction must lie in [0, 1]");
    validate(q);
    validate(s);
    validate(p, s);

    Ensemble e{q, s, p, master_seed, up_fraction, {}};
    e.traces.resize(n_shots);
    parallel_for(n_shots, threads, [&](std::size_t i) {
        e.traces[i] = generate_trace(q, s, p, up_fraction, master_seed, i);
    });
    return e;
}

}  // namespace slqd
