#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "slqd/electrostatics.hpp"
#include "slqd/errors.hpp"
#include "slqd/model.hpp"
#include "slqd/planner.hpp"
#include "slqd/readout.hpp"
#include "slqd/sensing.hpp"
#include "slqd/trace_io.hpp"
#include "slqd/tracegen.hpp"

namespace slqd::cli {

namespace {

constexpr const char* kToolVersion = "0.1.0";

struct Device {
    std::string name;
    QubitParams qubit;
    SensorParams sensor;
    PulseSequence pulse;
    std::optional<ReadoutReference> reference;
};

Device load_device(const DeviceOptions& o) {
    if (!o.preset.empty() && !o.params.empty())
        throw UsageError("give either --preset or --params, not both");
    Device d;
    if (!o.params.empty()) {
        const auto j = read_json(o.params);
        try {
            j.at("qubit").get_to(d.qubit);
            j.at("sensor").get_to(d.sensor);
            if (j.contains("pulse")) j.at("pulse").get_to(d.pulse);
        } catch (const nlohmann::json::exception& ex) {
            throw ValidationError("parameter file " + o.params + " does not match the schema: " + ex.what());
        }
        d.name = o.params;
        if (!j.contains("pulse")) d.pulse = PulseSequence{1e-3, 1e-3, 1e-3, 0.0};
    } else {
        if (o.preset.empty()) throw UsageError("--preset or --params is required");
        const Preset& p = preset(o.preset);
        d = {o.preset, p.qubit, p.sensor, p.pulse, p.reference};
    }
    if (o.fwhm) d.sensor.peak.fwhm = *o.fwhm;
    validate(d.qubit);
    validate(d.sensor);
    return d;
}

nlohmann::json device_config(const DeviceOptions& o) {
    nlohmann::json j = {{"preset", o.preset.empty() ? nlohmann::json(nullptr) : nlohmann::json(o.preset)},
                        {"params", o.params.empty() ? nlohmann::json(nullptr) : nlohmann::json(o.params)}};
    j["fwhm"] = o.fwhm ? nlohmann::json(*o.fwhm) : nlohmann::json(nullptr);
    return j;
}

template <class T>
nlohmann::json opt_json(const std::optional<T>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json null_if_empty(const std::string& s) {
    return s.empty() ? nlohmann::json(nullptr) : nlohmann::json(s);
}

// Common report envelope: command, tool version, seed and resolved config.
nlohmann::json envelope(const std::string& command, const GlobalOptions& g,
                        std::optional<std::uint64_t> seed, nlohmann::json config) {
    config["threads"] = g.threads;
    config["out_dir"] = g.out_dir.generic_string();
    return {{"command", command},
            {"tool_version", kToolVersion},
            {"seed", opt_json(seed)},
            {"config", std::move(config)}};
}

OptimizerOptions optimizer_options(const GlobalOptions& g, std::size_t grid_points = 24) {
    OptimizerOptions o;
    o.threads = g.threads;
    o.grid_points = grid_points;
    return o;
}

std::vector<DistancePoint> read_shift_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path + " is empty");
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        for (std::string cell; std::getline(ss, cell, ',');) {
            cell.erase(0, cell.find_first_not_of(" \t\r"));
            cell.erase(cell.find_last_not_of(" \t\r") + 1);
            out.push_back(cell);
        }
        return out;
    };
    const auto header = split(line);
    const auto d_col = std::find(header.begin(), header.end(), "d_nm");
    const auto v_col = std::find(header.begin(), header.end(), "vm_mV");
    if (d_col == header.end() || v_col == header.end())
        throw ValidationError(path + " needs d_nm and vm_mV columns");
    const auto di = static_cast<std::size_t>(d_col - header.begin());
    const auto vi = static_cast<std::size_t>(v_col - header.begin());
    std::vector<DistancePoint> pts;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split(line);
        if (cells.size() <= std::max(di, vi))
            throw ValidationError(path + ":" + std::to_string(row) + " has too few columns");
        try {
            pts.push_back({std::stod(cells[di]), std::stod(cells[vi])});
        } catch (const std::exception&) {
            throw ValidationError(path + ":" + std::to_string(row) + " holds a non-numeric value");
        }
    }
    return pts;
}

std::vector<DistancePoint> shift_points(const std::string& data) {
    return data.empty() ? to_distance_points(measured_sensor_shifts()) : read_shift_csv(data);
}

DeviceGeometry load_geometry(const std::string& path) {
    const auto j = read_json(path);
    return j.get<DeviceGeometry>();
}

// Grid covering all panelled conductors plus a margin.
GridSpec default_grid(const DeviceGeometry& g, double spacing) {
    if (!(spacing > 0.0)) throw UsageError("--spacing must be positive");
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    for (const auto& c : g.conductors) {
        x0 = std::min(x0, c.rect.x0);
        y0 = std::min(y0, c.rect.y0);
        x1 = std::max(x1, c.rect.x1);
        y1 = std::max(y1, c.rect.y1);
    }
    if (g.conductors.empty()) throw ValidationError("geometry has no conductors");
    const double margin = 4.0 * spacing;
    x0 = std::floor((x0 - margin) / spacing) * spacing;
    y0 = std::floor((y0 - margin) / spacing) * spacing;
    const auto nx = static_cast<std::size_t>(std::ceil((x1 + margin - x0) / spacing)) + 1;
    const auto ny = static_cast<std::size_t>(std::ceil((y1 + margin - y0) / spacing)) + 1;
    return {x0, y0, spacing, nx, ny};
}

std::string csv_of(const auto& writer) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    writer(os);
    return os.str();
}

nlohmann::json report_json(const FidelityReport& r) { return nlohmann::json(r); }

}  // namespace

nlohmann::json run_presets(const GlobalOptions& g, const PresetsOptions& o) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& name : preset_names()) {
        if (!o.name.empty() && name != o.name) continue;
        const Preset& p = preset(name);
        list.push_back({{"name", name},
                        {"qubit", p.qubit},
                        {"sensor", p.sensor},
                        {"pulse", p.pulse},
                        {"reference", p.reference}});
    }
    if (list.empty()) preset(o.name);  // throws NotFoundError naming the valid presets
    auto out = envelope("presets", g, std::nullopt, {{"name", null_if_empty(o.name)}});
    out["presets"] = std::move(list);
    write_json(g.out_dir / "presets.json", out);
    return out;
}

nlohmann::json run_simulate(const GlobalOptions& g, const SimulateOptions& o) {
    if (o.shots < 1) throw UsageError("--shots must be at least 1");
    if (!(o.up_fraction >= 0.0 && o.up_fraction <= 1.0))
        throw UsageError("--up-fraction must lie in [0, 1]");
    Device d = load_device(o.device);
    if (o.t_read) d.pulse.t_read = *o.t_read;
    validate(d.pulse, d.sensor);
    const std::uint64_t seed = resolve_seed(g);

    const Ensemble e = generate_ensemble(d.qubit, d.sensor, d.pulse, static_cast<std::size_t>(o.shots),
                                         o.up_fraction, seed, g.threads);
    const auto sidecar = write_ensemble(e, g.out_dir, o.stem);

    nlohmann::json traces = nlohmann::json::array();
    for (std::size_t idx : o.trace_csv) {
        if (idx >= e.traces.size()) throw UsageError("--trace-csv index out of range");
        const auto path = g.out_dir / (o.stem + "_trace" + std::to_string(idx) + ".csv");
        write_trace_csv(e.traces[idx], path);
        traces.push_back(path.filename().string());
    }

    std::size_t n_up = 0, n_blip = 0;
    for (const auto& t : e.traces) {
        n_up += t.truth.true_spin == Spin::up;
        n_blip += t.truth.has_blip();
    }
    auto out = envelope("simulate", g, seed,
                        {{"device", device_config(o.device)},
                         {"shots", o.shots},
                         {"up_fraction", o.up_fraction},
                         {"t_read", d.pulse.t_read},
                         {"stem", o.stem}});
    out["result"] = {{"sidecar", sidecar.filename().string()},
                     {"data_file", o.stem + ".bin"},
                     {"n_traces", e.traces.size()},
                     {"n_up", n_up},
                     {"n_blip", n_blip},
                     {"trace_csv", traces},
                     {"qubit", d.qubit},
                     {"sensor", d.sensor},
                     {"pulse", d.pulse}};
    write_json(g.out_dir / (o.stem + "_run.json"), out);
    return out;
}

nlohmann::json run_analyze(const GlobalOptions& g, const AnalyzeOptions& o) {
    if (o.ensemble.empty()) throw UsageError("--ensemble is required");
    const Ensemble e = read_ensemble(o.ensemble);
    std::optional<ReadoutReference> ref;
    if (!o.preset.empty()) ref = preset(o.preset).reference;

    double threshold = 0.5 * (e.sensor.mu_0 + e.sensor.mu_1);
    std::string threshold_source = "midpoint";
    if (o.threshold) {
        threshold = *o.threshold;
        threshold_source = "flag";
    } else if (ref) {
        threshold = ref->v_opt;
        threshold_source = "preset";
    }
    const double t_read = o.t_read.value_or(e.pulse.t_read);

    const EnsembleAnalysis a = analyze_ensemble(e.traces, threshold, t_read);
    const SnrReport snr = measure_snr(e.traces);
    const StcFidelity stc = stc_fidelity(e.qubit, t_read);

    auto out = envelope("analyze", g, e.master_seed,
                        {{"ensemble", o.ensemble},
                         {"preset", null_if_empty(o.preset)},
                         {"threshold", opt_json(o.threshold)},
                         {"t_read", opt_json(o.t_read)}});
    nlohmann::json snr_json = snr;
    snr_json["charge_sensitivity"] =
        snr.tau_min > 0.0 && std::isfinite(snr.tau_min) ? nlohmann::json(charge_sensitivity(snr.tau_min))
                                                        : nlohmann::json(nullptr);
    out["result"] = {{"analysis", a},
                     {"threshold_source", threshold_source},
                     {"snr", snr_json},
                     {"stc", {{"f_stc_down", stc.down}, {"f_stc_up", stc.up}}}};
    if (ref) {
        out["reference"] = {{"f_m", ref->f_m}, {"snr", ref->snr}, {"tau_min", ref->tau_min},
                            {"t_opt", ref->t_opt}, {"v_opt", ref->v_opt}};
        out["delta"] = {{"f_m", a.f_m.value - ref->f_m},
                        {"snr", std::isfinite(snr.snr) ? nlohmann::json(snr.snr - ref->snr)
                                                       : nlohmann::json(nullptr)}};
    }
    write_json(g.out_dir / "analysis.json", out);
    return out;
}

nlohmann::json run_optimize(const GlobalOptions& g, const OptimizeOptions& o) {
    if (o.n_mc < 1000) throw UsageError("--n-mc must be at least 1000");
    const Device d = load_device(o.device);
    const std::uint64_t seed = resolve_seed(g);
    const FidelityReport r =
        optimize_readout(d.qubit, d.sensor, o.n_mc, seed, optimizer_options(g, o.grid_points));

    auto out = envelope("optimize", g, seed,
                        {{"device", device_config(o.device)},
                         {"n_mc", o.n_mc},
                         {"grid_points", o.grid_points}});
    out["result"] = report_json(r);
    if (d.reference) {
        const auto& ref = *d.reference;
        const auto fe = electrical_fidelity_mc(d.qubit, d.sensor, ref.v_opt, ref.t_opt, o.n_mc,
                                               seed, g.threads);
        const FidelityReport at_ref = compose_report(d.qubit, ref.t_opt, ref.v_opt, fe);
        out["at_reference_point"] = report_json(at_ref);
        out["reference"] = ref;
        out["delta"] = {{"f_m", r.f_m.value - ref.f_m},
                        {"f_m_vs_reference_point", r.f_m.value - at_ref.f_m.value},
                        {"t_opt_ratio", r.t_opt / ref.t_opt},
                        {"v_opt", r.v_opt - ref.v_opt}};
    }
    write_json(g.out_dir / "optimize.json", out);
    return out;
}

nlohmann::json run_fit_scaling(const GlobalOptions& g, const FitScalingOptions& o) {
    if (!o.data.empty() && !o.geometry.empty())
        throw UsageError("give either --data or --geometry, not both");
    std::vector<DistancePoint> pts;
    std::string source = "built-in sensor shifts";
    if (!o.geometry.empty()) {
        const DeviceGeometry geo = load_geometry(o.geometry);
        if (!geo.analysis_box) throw ValidationError("geometry " + o.geometry + " defines no analysis box");
        const Rect& box = geo.analysis_box->rect;
        const GridSpec grid{box.x0, box.y0, o.spacing,
                            static_cast<std::size_t>(std::floor(box.width() / o.spacing)) + 1,
                            static_cast<std::size_t>(std::floor(box.height() / o.spacing)) + 1};
        const VmMap map = vm_map(geo, grid, {}, g.threads);
        pts = to_distance_points(analysis_samples(map, geo));
        source = o.geometry;
    } else {
        pts = shift_points(o.data);
        if (!o.data.empty()) source = o.data;
    }
    const ScalingFit fit = o.alpha ? fit_prefactor(pts, *o.alpha) : fit_power_law(pts);

    auto out = envelope("fit-scaling", g, std::nullopt,
                        {{"data", null_if_empty(o.data)},
                         {"geometry", null_if_empty(o.geometry)},
                         {"spacing", o.spacing},
                         {"alpha", opt_json(o.alpha)}});
    out["result"] = {{"fit", fit}, {"n_points", pts.size()}, {"source", source}};
    out["reference"] = {{"alpha", 1.4}, {"alpha_err", 0.1}};
    out["delta"] = {{"alpha", fit.alpha - 1.4}};
    write_json(g.out_dir / "fit.json", out);
    return out;
}

nlohmann::json run_range(const GlobalOptions& g, const RangeOptions& o) {
    if (!(o.d_min > 0.0) || !(o.d_max > o.d_min) || !(o.d_step > 0.0))
        throw UsageError("need 0 < --d-min < --d-max and a positive --d-step");
    if (!(o.level > 0.5 && o.level < 1.0)) throw UsageError("--level must lie in (0.5, 1)");
    if (o.n_mc < 1000) throw UsageError("--n-mc must be at least 1000");
    Device d = load_device(o.device);
    const std::uint64_t seed = resolve_seed(g);
    const auto pts = shift_points(o.data);
    const OptimizerOptions opts = optimizer_options(g);

    ScalingFit fit = o.prefactor ? ScalingFit{*o.prefactor, o.alpha, 0.0, 0.0} : fit_prefactor(pts, o.alpha);
    if (!(fit.prefactor > 0.0) || !(fit.alpha > 0.0))
        throw UsageError("--alpha and --prefactor must be positive");

    nlohmann::json calibration = nullptr;
    if (o.calibrate_distance) {
        const ScalingFit cal_fit = fit_prefactor(pts, o.calibrate_alpha);
        const double fwhm = calibrate_peak_fwhm(d.qubit, d.sensor, cal_fit, *o.calibrate_distance,
                                                o.level, o.n_mc, seed, opts);
        d.sensor.peak.fwhm = fwhm;
        calibration = {{"alpha", o.calibrate_alpha},
                       {"distance_nm", *o.calibrate_distance},
                       {"fwhm", fwhm}};
    }

    std::vector<double> distances;
    for (std::size_t i = 0;; ++i) {
        const double x = o.d_min + o.d_step * static_cast<double>(i);
        if (x > o.d_max * (1.0 + 1e-12)) break;
        distances.push_back(x);
    }
    const DistanceCurve c = fidelity_vs_distance(d.qubit, d.sensor, fit, distances, o.n_mc, seed, opts);
    write_text(g.out_dir / "range.csv", csv_of([&](std::ostream& os) { write_curve_csv(c, os); }));

    const auto cross = crossing_distance(c, o.level);
    auto out = envelope("range", g, seed,
                        {{"device", device_config(o.device)},
                         {"alpha", o.alpha},
                         {"prefactor", opt_json(o.prefactor)},
                         {"data", null_if_empty(o.data)},
                         {"calibrate_distance", opt_json(o.calibrate_distance)},
                         {"calibrate_alpha", o.calibrate_alpha},
                         {"level", o.level},
                         {"d_min", o.d_min},
                         {"d_max", o.d_max},
                         {"d_step", o.d_step},
                         {"n_mc", o.n_mc}});
    out["result"] = {{"fit", fit},
                     {"peak", d.sensor.peak},
                     {"fwhm_calibration", calibration},
                     {"crossing_nm", opt_json(cross)},
                     {"f_m_at_d_min", c.fidelity.front()},
                     {"n_points", c.distances.size()},
                     {"csv", "range.csv"}};
    if (d.reference) {
        out["reference"] = {{"f_m", d.reference->f_m}};
        out["delta"] = {{"f_m_at_d_min", c.fidelity.front() - d.reference->f_m}};
    }
    write_json(g.out_dir / "range.json", out);
    return out;
}

nlohmann::json run_field_map(const GlobalOptions& g, const FieldMapOptions& o) {
    if (o.geometry.empty()) throw UsageError("--geometry is required");
    if (!o.grid.empty() && o.grid.size() != 5) throw UsageError("--grid takes x0 y0 spacing nx ny");
    if (!o.calibrate_point.empty() && o.calibrate_point.size() != 2)
        throw UsageError("--calibrate-point takes x y");
    const int calibrations = !o.calibrate_site.empty() + !o.calibrate_point.empty() + !o.scale_geometry.empty();
    if (calibrations > 1) throw UsageError("choose one of --calibrate-site, --calibrate-point, --scale-geometry");

    const DeviceGeometry geo = load_geometry(o.geometry);
    GridSpec grid;
    if (o.grid.empty()) {
        grid = default_grid(geo, o.spacing);
    } else {
        if (o.grid[3] < 1 || o.grid[4] < 1) throw UsageError("--grid needs nx, ny >= 1");
        grid = {o.grid[0], o.grid[1], o.grid[2], static_cast<std::size_t>(o.grid[3]),
                static_cast<std::size_t>(o.grid[4])};
    }
    VmMap map = vm_map(geo, grid, o.source, g.threads);
    if (!o.calibrate_site.empty()) {
        map = calibrate(map, geo.conductor(o.calibrate_site).rect.center(), o.measured_mv);
    } else if (!o.calibrate_point.empty()) {
        map = calibrate(map, {o.calibrate_point[0], o.calibrate_point[1]}, o.measured_mv);
    } else if (!o.scale_geometry.empty()) {
        const DeviceGeometry ref = load_geometry(o.scale_geometry);
        const double scale = site_calibration_scale(ref, o.scale_site, o.measured_mv, g.threads);
        map = apply_calibration_scale(map, scale, o.scale_geometry + ":" + o.scale_site);
    }

    write_text(g.out_dir / "field_map.csv", csv_of([&](std::ostream& os) { write_map_csv(map, os); }));

    nlohmann::json sites = nlohmann::json::array();
    for (const auto& c : geo.conductors) {
        if (c.role != ConductorRole::qubit_site) continue;
        const Point2 p = c.rect.center();
        nlohmann::json row = {{"label", c.label},
                              {"x_nm", p.x},
                              {"y_nm", p.y},
                              {"distance_nm", std::hypot(p.x - map.source_center.x, p.y - map.source_center.y)}};
        try {
            row["vm_raw_mV"] = map.raw_value_at(p);
            row["vm_mV"] = map.value_at(p);
        } catch (const DomainError&) {
            row["vm_raw_mV"] = nullptr;
            row["vm_mV"] = nullptr;
        }
        sites.push_back(std::move(row));
    }

    nlohmann::json scaling = nullptr;
    if (geo.analysis_box) {
        const auto samples = analysis_samples(map, geo);
        if (samples.size() >= 3) {
            const auto pts = to_distance_points(samples);
            scaling = {{"fit", fit_power_law(pts)}, {"n_points", samples.size()}};
        }
    }

    PeakShape peak;
    peak.fwhm = o.fwhm > 0.0 ? o.fwhm : kDefaultPeakFwhm;
    const BoolGrid strong = strong_response_contour(map, peak, o.fraction);
    const auto n_strong = static_cast<std::size_t>(std::count(strong.values.begin(), strong.values.end(), true));

    auto out = envelope("field-map", g, std::nullopt,
                        {{"geometry", o.geometry},
                         {"grid", grid},
                         {"source", null_if_empty(o.source)},
                         {"calibrate_site", null_if_empty(o.calibrate_site)},
                         {"calibrate_point", o.calibrate_point},
                         {"measured_mv", o.measured_mv},
                         {"scale_geometry", null_if_empty(o.scale_geometry)},
                         {"scale_site", o.scale_site},
                         {"fraction", o.fraction},
                         {"fwhm", peak.fwhm}});
    out["result"] = {{"map", map_metadata(map)},
                     {"approximate_geometry", geo.approximate},
                     {"sites", std::move(sites)},
                     {"scaling", scaling},
                     {"strong_response", {{"threshold_mv", strong_response_threshold(peak, o.fraction)},
                                          {"fraction", o.fraction},
                                          {"n_nodes", n_strong}}},
                     {"csv", "field_map.csv"}};
    if (geo.analysis_box) {
        out["reference"] = {{"alpha", 1.4}, {"alpha_err", 0.1}};
        if (!scaling.is_null()) out["delta"] = {{"alpha", scaling["fit"]["alpha"].get<double>() - 1.4}};
    }
    write_json(g.out_dir / "field_map.json", out);
    return out;
}

nlohmann::json run_plan(const GlobalOptions& g, const PlanOptions& o) {
    ArraySpec spec;
    spec.n_qubits = o.n_qubits;
    spec.pitch = o.pitch;
    try {
        spec.geometry = array_geometry_from_string(o.array);
    } catch (const ValidationError& ex) {
        throw UsageError(ex.what());
    }
    spec.sensor_position = o.sensor_position;
    spec.sensor_standoff = o.sensor_standoff;
    spec.row_spacing = o.row_spacing;
    validate(spec);
    if (!(o.threshold > 0.5 && o.threshold < 1.0)) throw UsageError("--threshold must lie in (0.5, 1)");
    if (o.n_mc < 1000) throw UsageError("--n-mc must be at least 1000");
    if (!o.map.empty() && o.alpha) throw UsageError("give either --alpha or --map, not both");

    const nlohmann::json config = {{"device", device_config(o.device)},
                                   {"array", spec},
                                   {"alpha", opt_json(o.alpha)},
                                   {"prefactor", opt_json(o.prefactor)},
                                   {"map", null_if_empty(o.map)},
                                   {"map_spacing", o.map_spacing},
                                   {"calibration_geometry", null_if_empty(o.calibration_geometry)},
                                   {"calibration_site", o.calibration_site},
                                   {"calibration_mv", o.calibration_mv},
                                   {"threshold", o.threshold},
                                   {"n_mc", o.n_mc},
                                   {"literature", o.literature},
                                   {"range_nm", opt_json(o.range_nm)}};
    const std::uint64_t seed = resolve_seed(g);

    if (o.literature) {
        if (!o.alpha) throw UsageError("literature mode needs --alpha");
        nlohmann::json vm_threshold = nullptr;
        double range = 0.0;
        if (o.range_nm) {
            range = *o.range_nm;
        } else {
            // Range where an SLQD1-like sensor anchored at the nearest
            // measured dot still reaches the threshold fidelity.
            const Device d = load_device(o.device);
            const double ratio = contrast_ratio_for_fidelity(d.qubit, d.sensor, o.threshold, o.n_mc,
                                                             seed, optimizer_options(g));
            const double vm = shift_for_contrast_ratio(d.sensor.peak, std::min(ratio, 1.0 - 1e-12));
            const auto& anchor = measured_sensor_shifts().front();
            range = sensor_range_for_alpha(*o.alpha, vm, anchor.distance_nm, anchor.v_m_mv);
            vm_threshold = vm;
        }
        const std::size_t n = literature_row(*o.alpha, o.pitch, spec.geometry, range, o.row_spacing);
        auto out = envelope("plan-array", g, seed, config);
        out["result"] = {{"mode", "literature"},
                         {"sensor_range_nm", range},
                         {"vm_threshold_mv", vm_threshold},
                         {"estimated_qubits", n}};
        write_json(g.out_dir / "plan.json", out);
        return out;
    }

    const Device d = load_device(o.device);
    VmSource source;
    nlohmann::json source_info;
    if (!o.map.empty()) {
        if (o.calibration_geometry.empty())
            throw UsageError("--map needs --calibration-geometry to set the V_M scale");
        const DeviceGeometry geo = load_geometry(o.map);
        const auto pos = qubit_positions(spec);
        double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
        for (const auto& p : pos) {
            x0 = std::min(x0, p.x);
            y0 = std::min(y0, p.y);
            x1 = std::max(x1, p.x);
            y1 = std::max(y1, p.y);
        }
        const double s = o.map_spacing;
        const GridSpec grid{x0 - s, y0 - s, s, static_cast<std::size_t>(std::ceil((x1 - x0) / s)) + 3,
                            static_cast<std::size_t>(std::ceil((y1 - y0) / s)) + 3};
        const DeviceGeometry ref = load_geometry(o.calibration_geometry);
        const double scale = site_calibration_scale(ref, o.calibration_site, o.calibration_mv, g.threads);
        VmMap map = apply_calibration_scale(vm_map(geo, grid, {}, g.threads), scale,
                                            o.calibration_geometry + ":" + o.calibration_site);
        source_info = {{"kind", "bem-map"}, {"map", map_metadata(map)}};
        source = std::move(map);
    } else {
        const double alpha = o.alpha.value_or(1.4);
        const ScalingFit fit = o.prefactor ? ScalingFit{*o.prefactor, alpha, 0.0, 0.0}
                                           : fit_prefactor(to_distance_points(measured_sensor_shifts()), alpha);
        source_info = {{"kind", "scaling-fit"}, {"fit", fit}};
        source = fit;
    }

    const PlanReport r = plan_array(spec, d.qubit, d.sensor, source, o.threshold, o.n_mc, seed,
                                    optimizer_options(g));
    write_text(g.out_dir / "plan.csv", csv_of([&](std::ostream& os) { write_plan_csv(r, os); }));
    auto out = envelope("plan-array", g, seed, config);
    out["result"] = {{"mode", "plan"}, {"plan", r}, {"vm_source", source_info}, {"csv", "plan.csv"}};
    write_json(g.out_dir / "plan.json", out);
    return out;
}

}  // namespace slqd::cli
