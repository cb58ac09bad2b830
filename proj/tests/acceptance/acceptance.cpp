// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "slqd/electrostatics.hpp"
#include "slqd/model.hpp"
#include "slqd/planner.hpp"
#include "slqd/random.hpp"
#include "slqd/readout.hpp"
#include "slqd/sensing.hpp"
#include "slqd/tracegen.hpp"

namespace {

using namespace slqd;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kSeed = 20240601;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void check(bool ok, const std::string& what) {
        if (!ok) pass = false;
        detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [x]");
    }
};

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

std::string pct(double v) { return fmt(100.0 * v, 4) + "%"; }

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

DeviceGeometry load_geometry(const std::string& name) {
    std::ifstream in(std::string(SLQD_DATA_DIR) + "/" + name);
    if (!in) throw std::runtime_error("missing data file " + name);
    nlohmann::json j;
    in >> j;
    return j.get<DeviceGeometry>();
}

struct TableRow {
    const char* name;
    double stc_d, stc_u, e_d, e_u, f_d, f_u, f_m;
};
constexpr TableRow kTable[] = {
    {"D1", 0.961, 0.992, 0.953, 0.691, 0.928, 0.686, 0.807},
    {"D2", 0.988, 0.986, 0.991, 0.929, 0.980, 0.916, 0.948},
    {"D3", 0.950, 0.989, 0.997, 0.953, 0.949, 0.943, 0.946},
};

Outcome ac1() {
    Outcome o;
    for (const auto& r : kTable) {
        const auto f = combine_fidelities(r.stc_d, r.stc_u, r.e_d, r.e_u);
        const bool ok = std::abs(f.f_down - r.f_d) <= 1e-3 && std::abs(f.f_up - r.f_u) <= 1e-3 &&
                        std::abs(f.f_m - r.f_m) <= 1e-3;
        o.check(ok, std::string(r.name) + " " + pct(f.f_down) + "/" + pct(f.f_up) + "/" + pct(f.f_m));
    }
    return o;
}

Outcome ac2() {
    Outcome o;
    for (const auto& r : kTable) {
        const Preset& p = preset(r.name);
        const StcFidelity s = stc_fidelity(p.qubit, p.reference.t_opt);
        const bool ok = std::abs(s.down - r.stc_d) <= 3e-3 && std::abs(s.up - r.stc_u) <= 3e-3;
        o.check(ok, std::string(r.name) + " " + pct(s.down) + "/" + pct(s.up));
    }
    return o;
}

Outcome ac3() {
    Outcome o;
    for (const auto& name : preset_names()) {
        const auto t0 = Clock::now();
        const Preset& p = preset(name);
        PulseSequence pulse = p.pulse;
        pulse.t_read = p.reference.t_opt;
        const Ensemble e = generate_ensemble(p.qubit, p.sensor, pulse, 5000, 0.5, kSeed);
        const EnsembleAnalysis a = analyze_ensemble(e.traces, p.reference.v_opt, p.reference.t_opt);
        const double dt = seconds_since(t0);
        const bool ok = std::abs(a.f_m.value - p.reference.f_m) <= 0.03 && dt < 60.0;
        o.check(ok, name + " F_M " + pct(a.f_m.value) + " vs " + pct(p.reference.f_m) + " (" +
                        fmt(dt, 3) + " s)");
    }
    return o;
}

Outcome ac4() {
    Outcome o;
    for (const auto& name : preset_names()) {
        const auto t0 = Clock::now();
        const Preset& p = preset(name);
        const FidelityReport r = optimize_readout(p.qubit, p.sensor, 10000, kSeed);
        const auto fe = electrical_fidelity_mc(p.qubit, p.sensor, p.reference.v_opt, p.reference.t_opt,
                                               10000, kSeed);
        const FidelityReport at_ref = compose_report(p.qubit, p.reference.t_opt, p.reference.v_opt, fe);
        const double dt = seconds_since(t0);
        const double ratio = r.t_opt / p.reference.t_opt;
        const bool ok = ratio <= 1.5 && ratio >= 1.0 / 1.5 && r.f_m.value >= at_ref.f_m.value - 0.005 &&
                        dt < 300.0;
        o.check(ok, name + " t_opt " + fmt(r.t_opt * 1e3, 3) + " ms, F_M " + pct(r.f_m.value) +
                        " vs " + pct(at_ref.f_m.value) + " at reference point (" + fmt(dt, 3) + " s)");
    }
    return o;
}

Outcome ac5() {
    Outcome o;
    const auto pts = to_distance_points(measured_sensor_shifts());
    const ScalingFit f = fit_power_law(pts);
    // Closed-form slope of ln V on ln d.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& p : pts) {
        const double x = std::log(p.distance_nm), y = std::log(p.v_m_mv);
        sx += x, sy += y, sxx += x * x, sxy += x * y;
    }
    const double n = static_cast<double>(pts.size());
    const double oracle = -(n * sxy - sx * sy) / (n * sxx - sx * sx);
    o.check(std::abs(f.alpha - 1.49) <= 0.05 && std::abs(f.alpha - oracle) < 1e-12,
            "alpha " + fmt(f.alpha) + " +- " + fmt(f.alpha_err, 2) + " (oracle " + fmt(oracle) + ")");
    o.check(std::abs(f.alpha - 1.4) <= std::hypot(f.alpha_err, 0.1), "consistent with 1.4 +- 0.1");
    double worst = 0.0;
    for (double alpha : {0.5, 1.4, 2.0, 3.0}) {
        std::vector<DistancePoint> syn;
        for (double d = 15.0; d < 500.0; d *= 1.3) syn.push_back({d, 987.6 / std::pow(d, alpha)});
        const ScalingFit g = fit_power_law(syn);
        worst = std::max({worst, std::abs(g.alpha - alpha), std::abs(g.prefactor / 987.6 - 1.0)});
    }
    o.check(worst < 1e-11, "synthetic power laws recovered to " + fmt(worst, 2));
    return o;
}

Outcome ac6() {
    Outcome o;
    const double a = tau_min(66e-6, 9.6);
    const double b = tau_min(100e-9, 12.7);
    o.check(std::abs(a / 720e-9 - 1.0) <= 0.02, "tau_min(66 us, 9.6) = " + fmt(a * 1e9) + " ns");
    o.check(std::abs(b / 0.62e-9 - 1.0) <= 0.02, "tau_min(100 ns, 12.7) = " + fmt(b * 1e9) + " ns");
    return o;
}

Outcome ac7() {
    Outcome o;
    const auto t0 = Clock::now();
    const Preset& p = preset("D3");
    const std::size_t n_mc = 4000;
    const auto pts = to_distance_points(measured_sensor_shifts());
    const ScalingFit slow = fit_prefactor(pts, 1.4);
    const ScalingFit steep = fit_prefactor(pts, 3.0);
    SensorParams s = p.sensor;
    s.peak.fwhm = calibrate_peak_fwhm(p.qubit, p.sensor, slow, 300.0, 0.9, n_mc, kSeed);

    std::vector<double> d;
    for (double x = 10.0; x <= 400.0; x += 10.0) d.push_back(x);
    const DistanceCurve c14 = fidelity_vs_distance(p.qubit, s, slow, d, n_mc, kSeed);
    const DistanceCurve c30 = fidelity_vs_distance(p.qubit, s, steep, d, n_mc, kSeed);
    const auto x14 = crossing_distance(c14, 0.9);
    const auto x30 = crossing_distance(c30, 0.9);
    const double dt = seconds_since(t0);
    o.check(x14 && std::abs(*x14 - 300.0) <= 15.0,
            "FWHM " + fmt(s.peak.fwhm) + " mV, 1/d^1.4 crossing " + (x14 ? fmt(*x14) : "none") + " nm");
    o.check(x30 && *x30 >= 100.0 && *x30 <= 160.0, "1/d^3 crossing " + (x30 ? fmt(*x30) : "none") + " nm");
    o.check(std::abs(c14.fidelity.front() - 0.946) <= 0.02 && std::abs(c30.fidelity.front() - 0.946) <= 0.02,
            "saturation " + pct(c14.fidelity.front()) + " / " + pct(c30.fidelity.front()));
    o.check(dt < 600.0, fmt(dt, 3) + " s");
    return o;
}

Outcome ac8() {
    Outcome o;
    const Preset& p = preset("D3");
    const std::size_t n_mc = 4000;
    const auto pts = to_distance_points(measured_sensor_shifts());

    ArraySpec row;
    row.n_qubits = 20;
    row.pitch = 30.0;
    const PlanReport fit = plan_array(row, p.qubit, p.sensor, fit_prefactor(pts, 1.4), 0.9, n_mc, kSeed);
    o.check(fit.readable_count >= 18 && fit.readable_count <= 20,
            "1/d^1.4 extrapolation " + std::to_string(fit.readable_count) + " readable");

    const DeviceGeometry four = load_geometry("four_dot_device.json");
    const DeviceGeometry array = load_geometry("linear_array_20.json");
    const double scale = site_calibration_scale(four, "D1", 7.1);
    const GridSpec grid{-290.0, -5.0, 5.0, 117, 3};
    const VmMap map = apply_calibration_scale(vm_map(array, grid), scale, "four_dot_device:D1");
    const PlanReport bem = plan_array(row, p.qubit, p.sensor, map, 0.9, n_mc, kSeed);
    o.check(bem.readable_count >= 12 && bem.readable_count <= 18,
            "BEM map with gate stubs " + std::to_string(bem.readable_count) + " readable");

    ArraySpec wide;
    wide.n_qubits = 20;
    wide.pitch = 80.0;
    const PlanReport steep = plan_array(wide, p.qubit, p.sensor, fit_prefactor(pts, 3.0), 0.9, n_mc, kSeed);
    o.check(steep.readable_count >= 3 && steep.readable_count <= 4,
            "1/d^3 at 80 nm pitch " + std::to_string(steep.readable_count) + " readable");

    const double ratio = contrast_ratio_for_fidelity(p.qubit, p.sensor, 0.9, n_mc, kSeed);
    const double vm = shift_for_contrast_ratio(p.sensor.peak, std::min(ratio, 1.0 - 1e-12));
    const auto& anchor = measured_sensor_shifts().front();
    const double range = sensor_range_for_alpha(3.0, vm, anchor.distance_nm, anchor.v_m_mv);
    const std::size_t lit = literature_row(3.0, 80.0, ArrayGeometry::linear_1xN, range);
    o.check(lit >= 3 && lit <= 4, "literature mode " + std::to_string(lit) + " (range " + fmt(range) + " nm)");
    return o;
}

double empty_phase_std(const SensorParams& s, const PulseSequence& p) {
    double sum = 0.0, sum2 = 0.0;
    std::size_t n = 0;
    const std::size_t settle = samples_for(20.0 / (2.0 * std::numbers::pi * s.f_c), s.gamma_s);
    for (std::size_t i = 0; i < 200; ++i) {
        const Trace t = synthesize_trace(SpinEvents{}, s, p, stream_seed(kSeed, i));
        for (std::size_t k = t.read_end_index + settle; k < t.samples.size(); ++k) {
            sum += t.samples[k];
            sum2 += static_cast<double>(t.samples[k]) * t.samples[k];
            ++n;
        }
    }
    const double mean = sum / static_cast<double>(n);
    return std::sqrt(sum2 / static_cast<double>(n) - mean * mean);
}

double sample_std(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

Outcome ac9() {
    Outcome o;

    // Seed determinism across thread counts.
    {
        const Preset& p = preset("D2");
        const Ensemble a = generate_ensemble(p.qubit, p.sensor, p.pulse, 200, 0.5, kSeed, 1);
        const Ensemble b = generate_ensemble(p.qubit, p.sensor, p.pulse, 200, 0.5, kSeed, 4);
        bool same = a.traces.size() == b.traces.size();
        for (std::size_t i = 0; same && i < a.traces.size(); ++i)
            same = a.traces[i].samples.size() == b.traces[i].samples.size() &&
                   std::memcmp(a.traces[i].samples.data(), b.traces[i].samples.data(),
                               a.traces[i].samples.size() * sizeof(float)) == 0 &&
                   a.traces[i].truth == b.traces[i].truth;
        const auto e1 = electrical_fidelity_mc(p.qubit, p.sensor, p.reference.v_opt, p.reference.t_opt, 4000, kSeed, 1);
        const auto e4 = electrical_fidelity_mc(p.qubit, p.sensor, p.reference.v_opt, p.reference.t_opt, 4000, kSeed, 4);
        same = same && e1.down.value == e4.down.value && e1.up.value == e4.up.value;
        o.check(same, std::string("bitwise identical with 1 and 4 threads"));
    }

    // Spread of F_M over independent seeds, N versus 4N shots.
    {
        const Preset& p = preset("D1");
        auto spread = [&](std::size_t n) {
            std::vector<double> f;
            for (std::uint64_t k = 0; k < 100; ++k) {
                const auto fe = electrical_fidelity_mc(p.qubit, p.sensor, p.reference.v_opt, p.reference.t_opt, n,
                                                       stream_seed(kSeed, k));
                f.push_back(compose_report(p.qubit, p.reference.t_opt, p.reference.v_opt, fe).f_m.value);
            }
            return sample_std(f);
        };
        const double ratio = spread(1000) / spread(4000);
        o.check(std::abs(ratio / 2.0 - 1.0) <= 0.3, "std-error ratio N/4N " + fmt(ratio, 3));
    }

    // Empty-phase noise against the filter cutoff.
    {
        Preset p = preset("D2");
        p.sensor.gamma_s = 400e3;
        p.sensor.f_c = 10e3;
        const double s1 = empty_phase_std(p.sensor, p.pulse);
        p.sensor.f_c = 40e3;
        const double s4 = empty_phase_std(p.sensor, p.pulse);
        o.check(std::abs(s4 / s1 / 2.0 - 1.0) <= 0.03, "noise ratio f_c x4 " + fmt(s4 / s1));
    }

    // BEM: Coulomb law, screening, reciprocity.
    {
        DeviceGeometry g;
        g.lever_arm = 1.0;
        g.panel_size = 4.0;
        g.conductors = {{"S", {-20, -20, 20, 20}, ConductorRole::sensor_dot}};
        double worst = 0.0;
        for (double d : {100.0, 200.0, 400.0}) {
            const double e = solve_mutual_energy(g, "S", Point2{d, 0.0});
            const double coulomb = 1e3 * constants::kCoulombVoltNm / (g.eps_r * d);
            worst = std::max(worst, std::abs(e / coulomb - 1.0));
        }
        o.check(worst <= 0.02, "Coulomb deviation " + pct(worst));

        DeviceGeometry h;
        h.panel_size = 2.0;
        h.conductors = {{"S", {-10, -10, 10, 10}, ConductorRole::sensor_dot}};
        const Point2 target{120.0, 0.0};
        bool monotone = true;
        double prev = solve_mutual_energy(h, "S", target);
        for (int k = 0; k < 3; ++k) {
            const double y = 60.0 - 15.0 * k;
            h.conductors.push_back({"G" + std::to_string(k), {40.0 + 30.0 * k, y, 60.0 + 30.0 * k, y + 20.0},
                                    ConductorRole::gate_grounded});
            const double e = solve_mutual_energy(h, "S", target);
            monotone = monotone && e < prev;
            prev = e;
        }
        o.check(monotone, std::string("screening monotone in added gates"));

        DeviceGeometry r;
        r.panel_size = 2.0;
        r.conductors = {{"A", {-12, -12, 12, 12}, ConductorRole::sensor_dot},
                        {"B", {70, 20, 86, 30}, ConductorRole::sensor_dot},
                        {"G", {20, -40, 60, -20}, ConductorRole::gate_grounded},
                        {"H", {30, 40, 50, 90}, ConductorRole::gate_grounded}};
        const double ab = solve_mutual_energy(r, "A", std::string_view{"B"});
        const double ba = solve_mutual_energy(r, "B", std::string_view{"A"});
        o.check(std::abs(ab / ba - 1.0) < 0.01, "reciprocity mismatch " + pct(std::abs(ab / ba - 1.0)));
    }
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"AC1 fidelity composition", ac1},
        {"AC2 spin-to-charge closed form", ac2},
        {"AC3 end-to-end Monte Carlo", ac3},
        {"AC4 readout optimizer", ac4},
        {"AC5 scaling fit", ac5},
        {"AC6 sensor metrics", ac6},
        {"AC7 distance roll-off", ac7},
        {"AC8 array planning", ac8},
        {"AC9 properties", ac9},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail.str() << std::endl;
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << '\n';
    return failed == 0 ? 0 : 1;
}
