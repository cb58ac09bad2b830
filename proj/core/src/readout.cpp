#include "slqd/readout.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "slqd/errors.hpp"
#include "slqd/parallel.hpp"
#include "slqd/random.hpp"

namespace slqd {

namespace {

Estimate binomial(std::size_t hits, std::size_t n) {
    if (n == 0) return {0.0, 0.0};
    const double p = static_cast<double>(hits) / static_cast<double>(n);
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n))};
}

void require_between_levels(const SensorParams& s, double threshold) {
    const double lo = std::min(s.mu_0, s.mu_1);
    const double hi = std::max(s.mu_0, s.mu_1);
    if (!(threshold > lo && threshold < hi))
        throw DomainError("threshold must lie strictly between mu_0 and mu_1");
}

void require_probability(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0))
        throw DomainError(std::string(name) + " must lie in [0, 1]");
}

// Upper bound on f_m at a given STC pair, attained with perfect electrical
// detection. f_m is affine in (e_d, e_u) with slope (stc_d + stc_u - 1) / 2.
double stc_bound(const StcFidelity& stc) {
    const double s = 0.5 * (stc.down + stc.up);
    return std::max(s, 1.0 - s);
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    std::vector<double> g(n);
    if (n == 1) {
        g[0] = lo;
        return g;
    }
    const double a = std::log(lo);
    const double b = std::log(hi);
    for (std::size_t i = 0; i < n; ++i)
        g[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

}  // namespace

// ---- detection ---------------------------------------------------------------

BlipDetection detect_blip(const Trace& t, double threshold) {
    return detect_blip(t, threshold, std::numeric_limits<double>::infinity());
}

BlipDetection detect_blip(const Trace& t, double threshold, double t_read) {
    require_between_levels(t.sensor, threshold);
    auto window = t.read_window();
    if (window.empty()) throw MalformedTraceError("trace has an empty read window");
    if (std::isfinite(t_read))
        window = window.first(std::min(window.size(), std::max<std::size_t>(
                                                          1, samples_for(t_read, t.sample_rate))));

    const double o = t.sensor.orientation();
    const double th = o * threshold;
    for (std::size_t i = 0; i < window.size(); ++i) {
        if (o * static_cast<double>(window[i]) > th)
            return {true, static_cast<double>(i) / t.sample_rate};
    }
    return {false, std::nullopt};
}

// ---- fidelity algebra --------------------------------------------------------

StcFidelity stc_fidelity(const QubitParams& q, double t_read) {
    if (!(t_read > 0.0)) throw DomainError("t_read must be positive");
    const double g_up = 1.0 / q.t_out_up;
    const double g_1 = 1.0 / q.t1;
    const double g = g_up + g_1;
    return {std::exp(-t_read / q.t_out_down), g_up / g * -std::expm1(-g * t_read)};
}

StateFidelities combine_fidelities(double f_stc_down, double f_stc_up, double f_e_down,
                                   double f_e_up) {
    require_probability(f_stc_down, "f_stc_down");
    require_probability(f_stc_up, "f_stc_up");
    require_probability(f_e_down, "f_e_down");
    require_probability(f_e_up, "f_e_up");
    StateFidelities f;
    f.f_down = f_stc_down * f_e_down + (1.0 - f_stc_down) * (1.0 - f_e_up);
    f.f_up = f_stc_up * f_e_up + (1.0 - f_stc_up) * (1.0 - f_e_down);
    f.f_m = (f.f_down + f.f_up) / 2.0;
    return f;
}

FidelityReport compose_report(const QubitParams& q, double t_read, double threshold,
                              const ElectricalFidelity& fe) {
    const StcFidelity stc = stc_fidelity(q, t_read);
    const StateFidelities f = combine_fidelities(stc.down, stc.up, fe.down.value, fe.up.value);
    const double vd = fe.down.err * fe.down.err;
    const double vu = fe.up.err * fe.up.err;
    const double slope = 0.5 * (stc.down + stc.up - 1.0);

    FidelityReport r;
    r.f_stc_down = {stc.down, 0.0};
    r.f_stc_up = {stc.up, 0.0};
    r.f_e_down = fe.down;
    r.f_e_up = fe.up;
    r.f_down = {f.f_down, std::sqrt(stc.down * stc.down * vd +
                                    (1.0 - stc.down) * (1.0 - stc.down) * vu)};
    r.f_up = {f.f_up,
              std::sqrt(stc.up * stc.up * vu + (1.0 - stc.up) * (1.0 - stc.up) * vd)};
    r.f_m = {f.f_m, std::abs(slope) * std::sqrt(vd + vu)};
    r.t_opt = t_read;
    r.v_opt = threshold;
    return r;
}

// ---- Monte Carlo detector model -----------------------------------------------

DetectionSampler::DetectionSampler(const QubitParams& q, const SensorParams& s, double t_max,
                                   std::size_t n_mc, std::uint64_t seed, unsigned threads)
    : sensor_(s), t_max_(t_max), orientation_(s.orientation()) {
    validate(q);
    validate(s);
    if (!(t_max > 0.0)) throw DomainError("t_max must be positive");
    if (n_mc == 0) throw DomainError("n_mc must be positive");

    const PulseSequence pulse{.t_load = 2.0 / s.gamma_s, .t_read = t_max,
                              .t_empty = 1.0 / s.gamma_s, .read_level_offset = 0.0};
    const double escape_mean = 1.0 / (1.0 / q.t_out_up + 1.0 / q.t1);
    // P(start < t_max) for the truncated escape law.
    const double mass = -std::expm1(-t_max / escape_mean);

    down_.resize(n_mc);
    up_.resize(n_mc);
    parallel_for(2 * n_mc, threads, [&](std::size_t i) {
        thread_local std::vector<float> buf;
        const std::uint64_t shot_seed = stream_seed(seed, i);
        const bool is_up = i >= n_mc;

        SpinEvents ev;
        Shot shot;
        if (is_up) {
            Rng rng(stream_seed(shot_seed, 0));
            const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
            const double start = -escape_mean * std::log1p(-u * mass);
            const double dwell = draw_exponential(rng, q.t_in_down);
            ev.true_spin = Spin::up;
            ev.tunnel_out_at = start;
            if (start + dwell < t_max) ev.tunnel_in_at = start + dwell;
            shot.blip_start = start;
        }
        const TraceLayout l = synthesize_samples(ev, s, pulse, stream_seed(shot_seed, 1), buf);

        float best = -std::numeric_limits<float>::infinity();
        for (std::size_t k = l.read_start; k < l.read_end; ++k) {
            const float v = static_cast<float>(orientation_) * buf[k];
            if (v > best) {
                best = v;
                shot.records.push_back({static_cast<std::uint32_t>(k - l.read_start), v});
            }
        }
        shot.records.shrink_to_fit();
        (is_up ? up_[i - n_mc] : down_[i]) = std::move(shot);
    });
}

std::size_t DetectionSampler::window_samples(double t_read) const {
    if (!(t_read > 0.0)) throw DomainError("t_read must be positive");
    if (t_read > t_max_ * (1.0 + 1e-12))
        throw DomainError("t_read exceeds the sampled window");
    return std::max<std::size_t>(1, samples_for(t_read, sensor_.gamma_s));
}

float DetectionSampler::window_max(const Shot& shot, std::size_t m) {
    auto it = std::upper_bound(shot.records.begin(), shot.records.end(), m - 1,
                               [](std::size_t idx, const Record& r) { return idx < r.index; });
    if (it == shot.records.begin()) return -std::numeric_limits<float>::infinity();
    return std::prev(it)->value;
}

std::vector<float> DetectionSampler::down_maxima(std::size_t m) const {
    std::vector<float> out;
    out.reserve(down_.size());
    for (const Shot& s : down_) out.push_back(window_max(s, m));
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<float> DetectionSampler::up_maxima(double t_read, std::size_t m) const {
    std::vector<float> out;
    out.reserve(up_.size());
    for (const Shot& s : up_)
        if (s.blip_start < t_read) out.push_back(window_max(s, m));
    std::sort(out.begin(), out.end());
    return out;
}

ElectricalFidelity DetectionSampler::evaluate(double t_read, double threshold) const {
    require_between_levels(sensor_, threshold);
    const std::size_t m = window_samples(t_read);
    const double th = orientation_ * threshold;

    std::size_t quiet = 0;
    for (const Shot& s : down_)
        if (!(window_max(s, m) > th)) ++quiet;
    std::size_t eligible = 0;
    std::size_t seen = 0;
    for (const Shot& s : up_) {
        if (!(s.blip_start < t_read)) continue;
        ++eligible;
        if (window_max(s, m) > th) ++seen;
    }
    if (eligible == 0)
        throw InsufficientDataError("no sampled blip starts inside the read window");
    return {binomial(quiet, down_.size()), binomial(seen, eligible), down_.size(), eligible};
}

DetectionSampler::ThresholdChoice DetectionSampler::best_threshold(double t_read) const {
    const std::size_t m = window_samples(t_read);
    const std::vector<float> d = down_maxima(m);
    const std::vector<float> u = up_maxima(t_read, m);
    if (u.empty()) throw InsufficientDataError("no sampled blip starts inside the read window");

    const double lo = orientation_ * sensor_.mu_0;
    const double hi = orientation_ * sensor_.mu_1;
    std::vector<double> cuts{lo};
    for (float v : d)
        if (v > lo && v < hi) cuts.push_back(v);
    for (float v : u)
        if (v > lo && v < hi) cuts.push_back(v);
    cuts.push_back(hi);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    const double nd = static_cast<double>(d.size());
    const double nu = static_cast<double>(u.size());
    double best_score = -1.0;
    double best_mid = 0.5 * (lo + hi);
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double a = cuts[k];
        const double b = cuts[k + 1];
        const auto quiet = std::upper_bound(d.begin(), d.end(), a,
                                            [](double x, float v) { return x < v; }) -
                           d.begin();
        const auto seen =
            u.end() - std::lower_bound(u.begin(), u.end(), b,
                                       [](float v, double x) { return v < x; });
        const double score = static_cast<double>(quiet) / nd + static_cast<double>(seen) / nu;
        if (score > best_score) {
            best_score = score;
            best_mid = 0.5 * (a + b);
        }
    }
    const double threshold = orientation_ * best_mid;
    return {threshold, evaluate(t_read, threshold)};
}

ElectricalFidelity electrical_fidelity_mc(const QubitParams& q, const SensorParams& s,
                                          double threshold, double t_read, std::size_t n_mc,
                                          std::uint64_t seed, unsigned threads) {
    if (n_mc < 1000) throw DomainError("n_mc must be at least 1000");
    require_between_levels(s, threshold);
    DetectionSampler sampler(q, s, t_read, n_mc, seed, threads);
    return sampler.evaluate(t_read, threshold);
}

// ---- optimisation -----------------------------------------------------------

std::pair<double, double> read_time_bounds(const QubitParams& q) {
    return {q.t_out_up / 10.0, std::min(100.0 * q.t_out_up, q.t1)};
}

FidelityReport optimize_readout(const QubitParams& q, const SensorParams& s, std::size_t n_mc,
                                std::uint64_t seed, const OptimizerOptions& opts) {
    validate(q);
    validate(s);
    if (n_mc == 0) throw DomainError("n_mc must be positive");
    auto [lo, hi] = read_time_bounds(q);
    lo = std::max(lo, 1.0 / s.gamma_s);
    if (hi < lo) hi = lo;

    const std::vector<double> grid = log_grid(lo, hi, std::max<std::size_t>(2, opts.grid_points));
    std::vector<double> bound(grid.size());
    std::size_t peak = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        bound[i] = stc_bound(stc_fidelity(q, grid[i]));
        if (bound[i] > bound[peak]) peak = i;
    }

    struct Point {
        double t = 0.0;
        double f_m = -1.0;
        double threshold = 0.0;
        ElectricalFidelity fe;
    };
    auto evaluate_at = [&](const DetectionSampler& sampler, double t) {
        Point p;
        p.t = t;
        try {
            const auto choice = sampler.best_threshold(t);
            const StcFidelity stc = stc_fidelity(q, t);
            p.f_m = combine_fidelities(stc.down, stc.up, choice.electrical.down.value,
                                       choice.electrical.up.value)
                        .f_m;
            p.threshold = choice.threshold;
            p.fe = choice.electrical;
        } catch (const InsufficientDataError&) {
            p.f_m = -1.0;
        }
        return p;
    };

    // Coarse pass. The sampled window starts at a few times the STC optimum and
    // grows only while the STC bound can still beat the best fidelity found.
    double t_gen = std::min(hi, 4.0 * grid[peak]);
    std::optional<DetectionSampler> sampler;
    std::vector<Point> coarse;
    std::size_t best = 0;
    for (int pass = 0; pass < 4; ++pass) {
        sampler.emplace(q, s, t_gen, n_mc, seed, opts.threads);
        coarse.clear();
        for (double t : grid) {
            if (t > t_gen * (1.0 + 1e-12)) break;
            coarse.push_back(evaluate_at(*sampler, t));
        }
        best = 0;
        for (std::size_t i = 0; i < coarse.size(); ++i)
            if (coarse[i].f_m > coarse[best].f_m) best = i;
        std::size_t cap = 0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (bound[i] >= coarse[best].f_m) cap = std::min(grid.size() - 1, i + 1);
        if (grid[cap] <= t_gen * (1.0 + 1e-12)) break;
        t_gen = grid[cap];
    }
    if (coarse.empty() || coarse[best].f_m < 0.0)
        throw InsufficientDataError("Monte Carlo sample too small to evaluate any read time");

    Point incumbent = coarse[best];
    double left = coarse[best == 0 ? 0 : best - 1].t;
    double right = best + 1 < coarse.size() ? coarse[best + 1].t : incumbent.t;
    bool converged = false;
    for (int round = 0; round < opts.max_refinements; ++round) {
        const std::vector<double> fine =
            log_grid(left, std::min(right, t_gen), std::max<std::size_t>(3, opts.refine_points));
        std::vector<Point> pts;
        for (double t : fine) pts.push_back(evaluate_at(*sampler, t));
        std::size_t b = 0;
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (pts[i].f_m > pts[b].f_m) b = i;
        const double gain = pts[b].f_m - incumbent.f_m;
        if (gain > 0.0) incumbent = pts[b];
        left = pts[b == 0 ? 0 : b - 1].t;
        right = pts[b + 1 < pts.size() ? b + 1 : b].t;
        if (gain < opts.tolerance) {
            converged = true;
            break;
        }
    }

    FidelityReport r = compose_report(q, incumbent.t, incumbent.threshold, incumbent.fe);
    r.converged = converged;
    return r;
}

// ---- ensemble analysis -------------------------------------------------------

EnsembleAnalysis analyze_ensemble(std::span<const Trace> traces, double threshold, double t_read) {
    if (traces.empty()) throw EmptyEnsembleError("no traces to analyse");
    if (!(t_read > 0.0)) throw DomainError("t_read must be positive");
    const SensorParams& sensor = traces.front().sensor;
    EnsembleAnalysis a;
    a.threshold = threshold;
    a.t_read = t_read;
    for (const Trace& t : traces) {
        if (!(t.sensor == sensor) || t.sample_rate != traces.front().sample_rate)
            throw InconsistencyError("ensemble mixes traces from different sensor parameters");
        const bool blip = detect_blip(t, threshold, t_read).detected;
        ++a.counts[t.truth.true_spin == Spin::up ? 1 : 0][blip ? 1 : 0];
    }
    const std::size_t n_down = a.counts[0][0] + a.counts[0][1];
    const std::size_t n_up = a.counts[1][0] + a.counts[1][1];
    if (n_down == 0 || n_up == 0)
        throw InsufficientDataError("ensemble needs both spin-down and spin-up labels");
    a.down_correct = binomial(a.counts[0][0], n_down);
    a.up_correct = binomial(a.counts[1][1], n_up);
    a.f_m = {0.5 * (a.down_correct.value + a.up_correct.value),
             0.5 * std::hypot(a.down_correct.err, a.up_correct.err)};
    return a;
}

// ---- JSON -------------------------------------------------------------------

void to_json(nlohmann::json& j, const FidelityReport& r) {
    auto put = [&](const char* key, const Estimate& e) {
        j[key] = e.value;
        j[std::string(key) + "_err"] = e.err;
    };
    j = nlohmann::json::object();
    put("f_stc_down", r.f_stc_down);
    put("f_stc_up", r.f_stc_up);
    put("f_e_down", r.f_e_down);
    put("f_e_up", r.f_e_up);
    put("f_down", r.f_down);
    put("f_up", r.f_up);
    put("f_m", r.f_m);
    j["t_opt"] = r.t_opt;
    j["v_opt"] = r.v_opt;
    j["converged"] = r.converged;
}

void from_json(const nlohmann::json& j, FidelityReport& r) {
    auto get = [&](const char* key, Estimate& e) {
        j.at(key).get_to(e.value);
        j.at(std::string(key) + "_err").get_to(e.err);
    };
    get("f_stc_down", r.f_stc_down);
    get("f_stc_up", r.f_stc_up);
    get("f_e_down", r.f_e_down);
    get("f_e_up", r.f_e_up);
    get("f_down", r.f_down);
    get("f_up", r.f_up);
    get("f_m", r.f_m);
    j.at("t_opt").get_to(r.t_opt);
    j.at("v_opt").get_to(r.v_opt);
    r.converged = j.value("converged", true);
}

void to_json(nlohmann::json& j, const EnsembleAnalysis& a) {
    j = {{"confusion",
          {{"down_as_down", a.counts[0][0]},
           {"down_as_up", a.counts[0][1]},
           {"up_as_down", a.counts[1][0]},
           {"up_as_up", a.counts[1][1]}}},
         {"down_correct", a.down_correct.value},
         {"down_correct_err", a.down_correct.err},
         {"up_correct", a.up_correct.value},
         {"up_correct_err", a.up_correct.err},
         {"f_m", a.f_m.value},
         {"f_m_err", a.f_m.err},
         {"threshold", a.threshold},
         {"t_read", a.t_read}};
}

}  // namespace slqd
