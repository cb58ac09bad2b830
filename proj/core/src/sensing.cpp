#include "slqd/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>

#include "slqd/errors.hpp"

namespace slqd {

namespace {

struct RunningMoments {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
};

// Golden-section maximisation of f on [a, b].
template <class F>
double golden_max(F&& f, double a, double b, int iterations = 80) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < iterations && b - a > 1e-13 * (1.0 + std::abs(a)); ++i) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return std::max(fc, fd);
}

FidelityReport uninformative_report(const QubitParams& q, double t_read) {
    // Zero contrast: any threshold gives f_e_down + f_e_up = 1.
    const StcFidelity stc = stc_fidelity(q, t_read);
    FidelityReport r;
    r.f_stc_down = {stc.down, 0.0};
    r.f_stc_up = {stc.up, 0.0};
    r.f_e_down = {1.0, 0.0};
    r.f_e_up = {0.0, 0.0};
    const auto sf = combine_fidelities(stc.down, stc.up, 1.0, 0.0);
    r.f_down = {sf.f_down, 0.0};
    r.f_up = {sf.f_up, 0.0};
    r.f_m = {sf.f_m, 0.0};
    r.t_opt = t_read;
    r.converged = true;
    return r;
}

}  // namespace

double tau_min(double tau_int, double snr) {
    if (!(tau_int > 0.0) || !(snr > 0.0))
        throw DomainError("tau_min needs positive integration time and SNR");
    return tau_int / (snr * snr);
}

double charge_sensitivity(double tau_min_s) {
    if (!(tau_min_s > 0.0)) throw DomainError("charge sensitivity needs a positive tau_min");
    return std::sqrt(tau_min_s);
}

SnrReport measure_snr(std::span<const Trace> traces) {
    if (traces.empty()) throw InsufficientDataError("no traces to measure SNR on");
    const SensorParams& sensor = traces.front().sensor;
    RunningMoments low, high;
    for (const Trace& t : traces) {
        if (!(t.sensor == sensor))
            throw InconsistencyError("traces were generated by different sensors");
        if (t.read_end_index > t.samples.size() || t.read_start_index > t.read_end_index)
            throw MalformedTraceError("trace read window out of bounds");
        if (!t.truth.has_blip())
            for (std::size_t i = t.read_start_index; i < t.read_end_index; ++i) low.add(t.samples[i]);
        // Skip twenty filter time constants after the switch to the empty level.
        const std::size_t settle =
            samples_for(20.0 / (2.0 * std::numbers::pi * sensor.f_c), t.sample_rate);
        for (std::size_t i = t.read_end_index + settle; i < t.samples.size(); ++i)
            high.add(t.samples[i]);
    }
    if (low.n < 2 || high.n < 2)
        throw InsufficientDataError("ensemble does not contain both signal levels");

    SnrReport r;
    r.amplitude = std::abs(high.mean - low.mean);
    r.sigma = std::sqrt((low.m2 + high.m2) / static_cast<double>(low.n + high.n - 2));
    r.tau_int = 1.0 / sensor.f_c;
    if (r.sigma == 0.0) {
        r.noiseless = true;
        r.snr = std::numeric_limits<double>::infinity();
        r.tau_min = 0.0;
    } else {
        r.snr = r.amplitude / r.sigma;
        r.tau_min = r.snr > 0.0 ? tau_min(r.tau_int, r.snr) : std::numeric_limits<double>::infinity();
    }
    return r;
}

double ScalingFit::v_m(double distance_nm) const {
    if (!(distance_nm > 0.0)) throw DomainError("distance must be positive");
    return prefactor / std::pow(distance_nm, alpha);
}

ScalingFit fit_power_law(std::span<const DistancePoint> points) {
    const std::size_t n = points.size();
    if (n < 3) throw DomainError("power-law fit needs at least three points");
    double sx = 0.0, sy = 0.0;
    for (const auto& p : points) {
        if (!(p.distance_nm > 0.0) || !(p.v_m_mv > 0.0))
            throw DomainError("power-law fit needs positive distances and shifts");
        sx += std::log(p.distance_nm);
        sy += std::log(p.v_m_mv);
    }
    const double nd = static_cast<double>(n);
    const double mx = sx / nd, my = sy / nd;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& p : points) {
        const double dx = std::log(p.distance_nm) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(p.v_m_mv) - my);
    }
    if (!(sxx > 0.0)) throw DomainError("power-law fit needs at least two distinct distances");
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    if (!(slope < 0.0)) throw DomainError("shift does not decrease with distance");

    double ssr = 0.0;
    for (const auto& p : points) {
        const double e = std::log(p.v_m_mv) - (intercept + slope * std::log(p.distance_nm));
        ssr += e * e;
    }
    ScalingFit f;
    f.alpha = -slope;
    f.prefactor = std::exp(intercept);
    f.alpha_err = std::sqrt(ssr / (nd - 2.0) / sxx);
    f.residual = std::sqrt(ssr / nd);
    return f;
}

ScalingFit fit_prefactor(std::span<const DistancePoint> points, double alpha) {
    if (points.empty()) throw DomainError("prefactor fit needs at least one point");
    if (!(alpha > 0.0)) throw DomainError("alpha must be positive");
    double sum = 0.0;
    for (const auto& p : points) {
        if (!(p.distance_nm > 0.0) || !(p.v_m_mv > 0.0))
            throw DomainError("prefactor fit needs positive distances and shifts");
        sum += std::log(p.v_m_mv) + alpha * std::log(p.distance_nm);
    }
    const double nd = static_cast<double>(points.size());
    const double ln_k = sum / nd;
    double ssr = 0.0;
    for (const auto& p : points) {
        const double e = std::log(p.v_m_mv) - (ln_k - alpha * std::log(p.distance_nm));
        ssr += e * e;
    }
    return {std::exp(ln_k), alpha, 0.0, std::sqrt(ssr / nd)};
}

std::vector<DistancePoint> to_distance_points(std::span<const ShiftPoint> shifts) {
    std::vector<DistancePoint> out;
    out.reserve(shifts.size());
    for (const auto& s : shifts) out.push_back({s.distance_nm, s.v_m_mv});
    return out;
}

std::vector<DistancePoint> to_distance_points(std::span<const DistanceSample> samples) {
    std::vector<DistancePoint> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back({s.distance_nm, s.v_m_mv});
    return out;
}

double contrast(const PeakShape& peak, double v_m) {
    validate(peak);
    if (!(v_m >= 0.0)) throw DomainError("v_m must be non-negative");
    if (v_m == 0.0) return 0.0;
    auto g = [&](double v) { return peak_value(peak, v) - peak_value(peak, v - v_m); };

    // g is antisymmetric about center + v_m / 2, so the maximum lies below it.
    const double reach = peak_half_width_at(peak, 1e-4);
    const double lo = peak.center - reach;
    const double hi = peak.center + std::min(0.5 * v_m, reach);
    constexpr int kGrid = 2000;
    const double step = (hi - lo) / kGrid;
    int best = 0;
    double best_val = g(lo);
    for (int i = 1; i <= kGrid; ++i) {
        const double val = g(lo + step * i);
        if (val > best_val) {
            best_val = val;
            best = i;
        }
    }
    const double a = lo + step * std::max(0, best - 1);
    const double b = lo + step * std::min(kGrid, best + 1);
    const double refined = golden_max(g, a, b);
    return std::clamp(std::max(best_val, refined), 0.0, peak.height);
}

double mu1_at_distance(const SensorParams& s, double delta_v_d, double delta_v_0) {
    if (!(delta_v_0 > 0.0)) throw DomainError("full contrast must be positive");
    if (!(delta_v_d >= 0.0 && delta_v_d <= delta_v_0))
        throw DomainError("contrast ratio must lie in [0, 1]");
    return s.mu_0 + (s.mu_1 - s.mu_0) * (delta_v_d / delta_v_0);
}

SensorParams sensor_at_contrast(const SensorParams& s, double contrast_ratio) {
    SensorParams out = s;
    out.mu_1 = mu1_at_distance(s, contrast_ratio, 1.0);
    return out;
}

FidelityReport fidelity_at_contrast(const QubitParams& q, const SensorParams& s,
                                    double contrast_ratio, std::size_t n_mc, std::uint64_t seed,
                                    const OptimizerOptions& opts) {
    const SensorParams reduced = sensor_at_contrast(s, contrast_ratio);
    if (reduced.mu_1 == reduced.mu_0) {
        validate(q);
        return uninformative_report(q, read_time_bounds(q).first);
    }
    return optimize_readout(q, reduced, n_mc, seed, opts);
}

DistanceCurve fidelity_vs_distance(const QubitParams& q, const SensorParams& s,
                                   const ScalingFit& fit, std::span<const double> distances,
                                   std::size_t n_mc, std::uint64_t seed,
                                   const OptimizerOptions& opts) {
    if (!(fit.alpha > 0.0) || !(fit.prefactor > 0.0))
        throw DomainError("scaling fit needs positive alpha and prefactor");
    for (std::size_t i = 0; i < distances.size(); ++i) {
        if (!(distances[i] > 0.0)) throw DomainError("distances must be positive");
        if (i > 0 && !(distances[i] > distances[i - 1]))
            throw DomainError("distances must be strictly increasing");
    }
    DistanceCurve c;
    for (double d : distances) {
        const double vm = fit.v_m(d);
        const double con = contrast(s.peak, vm);
        const FidelityReport r = fidelity_at_contrast(q, s, con / s.peak.height, n_mc, seed, opts);
        c.distances.push_back(d);
        c.v_m.push_back(vm);
        c.contrast.push_back(con);
        c.fidelity.push_back(r.f_m.value);
        c.fidelity_err.push_back(r.f_m.err);
        c.t_opt.push_back(r.t_opt);
    }
    return c;
}

std::optional<double> crossing_distance(const DistanceCurve& c, double level) {
    for (std::size_t i = 0; i < c.fidelity.size(); ++i) {
        if (c.fidelity[i] >= level) continue;
        if (i == 0) return c.distances[0];
        const double f0 = c.fidelity[i - 1], f1 = c.fidelity[i];
        const double w = (f0 - level) / (f0 - f1);
        return c.distances[i - 1] + w * (c.distances[i] - c.distances[i - 1]);
    }
    return std::nullopt;
}

double contrast_ratio_for_fidelity(const QubitParams& q, const SensorParams& s, double target,
                                   std::size_t n_mc, std::uint64_t seed,
                                   const OptimizerOptions& opts, double tolerance) {
    if (!(target > 0.5 && target < 1.0)) throw DomainError("target fidelity must lie in (0.5, 1)");
    auto f_m = [&](double ratio) {
        return fidelity_at_contrast(q, s, ratio, n_mc, seed, opts).f_m.value;
    };
    if (f_m(1.0) < target) throw DomainError("full sensor contrast does not reach the target fidelity");
    double lo = 0.0, hi = 1.0;
    while (hi - lo > tolerance) {
        const double mid = 0.5 * (lo + hi);
        (f_m(mid) >= target ? hi : lo) = mid;
    }
    return hi;
}

double shift_for_contrast_ratio(const PeakShape& peak, double ratio) {
    validate(peak);
    if (!(ratio >= 0.0 && ratio < 1.0)) throw DomainError("contrast ratio must lie in [0, 1)");
    if (ratio == 0.0) return 0.0;
    double lo = 0.0, hi = peak.fwhm;
    while (contrast(peak, hi) / peak.height < ratio) hi *= 2.0;
    for (int i = 0; i < 100 && hi - lo > 1e-12 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (contrast(peak, mid) / peak.height >= ratio ? hi : lo) = mid;
    }
    return hi;
}

double calibrate_peak_fwhm(const QubitParams& q, const SensorParams& s, const ScalingFit& fit,
                           double distance_nm, double target, std::size_t n_mc,
                           std::uint64_t seed, const OptimizerOptions& opts) {
    const double ratio = contrast_ratio_for_fidelity(q, s, target, n_mc, seed, opts);
    // Contrast depends on v_m / fwhm only; solve for that ratio on a unit peak.
    PeakShape unit = s.peak;
    unit.fwhm = 1.0;
    unit.center = 0.0;
    return fit.v_m(distance_nm) / shift_for_contrast_ratio(unit, std::min(ratio, 1.0 - 1e-12));
}

double strong_response_threshold(const PeakShape& peak, double fraction) {
    validate(peak);
    return peak_half_width_at(peak, fraction);
}

BoolGrid strong_response_contour(const VmMap& map, const PeakShape& peak, double fraction) {
    const double threshold = strong_response_threshold(peak, fraction);
    BoolGrid out;
    out.grid = map.grid;
    out.values.resize(map.values.size());
    for (std::size_t i = 0; i < map.values.size(); ++i) out.values[i] = map.values[i] > threshold;
    return out;
}

void to_json(nlohmann::json& j, const ScalingFit& f) {
    j = {{"prefactor", f.prefactor},
         {"alpha", f.alpha},
         {"alpha_err", f.alpha_err},
         {"residual", f.residual}};
}

void from_json(const nlohmann::json& j, ScalingFit& f) {
    f.prefactor = j.at("prefactor").get<double>();
    f.alpha = j.at("alpha").get<double>();
    f.alpha_err = j.value("alpha_err", 0.0);
    f.residual = j.value("residual", 0.0);
    if (!(f.alpha > 0.0) || !(f.prefactor > 0.0))
        throw ValidationError("scaling fit needs positive alpha and prefactor");
}

void write_curve_csv(const DistanceCurve& c, std::ostream& os) {
    os << "d_nm,vm_mV,contrast,f_m,f_m_err\n";
    os << std::setprecision(10);
    for (std::size_t i = 0; i < c.distances.size(); ++i)
        os << c.distances[i] << ',' << c.v_m[i] << ',' << c.contrast[i] << ',' << c.fidelity[i]
           << ',' << c.fidelity_err[i] << '\n';
}

}  // namespace slqd
