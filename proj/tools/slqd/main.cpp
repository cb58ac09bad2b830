// slqd: single-lead quantum dot readout toolkit.
//
//   slqd simulate --preset D2 --shots 5000 --seed 42 --out-dir runs/d2
//   slqd analyze --ensemble runs/d2/ensemble.json --preset D2
//   slqd range --preset D3 --alpha 3.0 --seed 7
//   slqd plan-array --preset D3 --map data/linear_array_20.json --calibration-geometry data/four_dot_device.json
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "config.hpp"
#include "slqd/errors.hpp"
#include "slqd/parallel.hpp"

namespace {

using namespace slqd::cli;

const std::vector<std::string> kCommands{"presets", "simulate",  "analyze",  "optimize",
                                         "fit-scaling", "range", "field-map", "plan-array"};

void add_device(CLI::App* cmd, DeviceOptions& d) {
    cmd->add_option("--preset", d.preset, "Built-in donor preset (D1, D2, D3)");
    cmd->add_option("--params", d.params, "JSON file with qubit, sensor and pulse objects");
    cmd->add_option("--fwhm", d.fwhm, "Coulomb peak FWHM override, mV");
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(args, kCommands);

    CLI::App app{"Single-lead quantum dot readout simulation and analysis"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "slqd 0.1.0");

    GlobalOptions g;
    std::string out_dir = ".";
    app.add_option("--threads", g.threads, "Worker thread cap (0 = all cores)")->capture_default_str();
    app.add_option("--seed", g.seed, "Master RNG seed; a fresh one is drawn and recorded if absent");
    app.add_option("--out-dir", out_dir, "Directory for output artifacts")->capture_default_str();
    app.add_option("--config", g.config, "JSON file whose keys are option names");
    app.fallthrough();

    PresetsOptions presets;
    auto* c_presets = app.add_subcommand("presets", "List built-in donor presets");
    c_presets->add_option("name", presets.name, "Show a single preset");

    SimulateOptions sim;
    auto* c_sim = app.add_subcommand("simulate", "Generate a single-shot trace ensemble");
    add_device(c_sim, sim.device);
    c_sim->add_option("--shots", sim.shots, "Number of traces")->required();
    c_sim->add_option("--up-fraction", sim.up_fraction, "Probability of a spin-up shot")->capture_default_str();
    c_sim->add_option("--t-read", sim.t_read, "Read-phase duration, s (default: preset)");
    c_sim->add_option("--stem", sim.stem, "Output file stem")->capture_default_str();
    c_sim->add_option("--trace-csv", sim.trace_csv, "Also write trace N as CSV (repeatable)");

    AnalyzeOptions an;
    auto* c_an = app.add_subcommand("analyze", "Threshold-detect an ensemble and report fidelities and SNR");
    c_an->add_option("--ensemble", an.ensemble, "Ensemble sidecar JSON")->required();
    c_an->add_option("--preset", an.preset, "Compare against a preset's reference values");
    c_an->add_option("--threshold", an.threshold, "Detection threshold (default: preset V_opt or midpoint)");
    c_an->add_option("--t-read", an.t_read, "Measurement window, s (default: full read phase)");

    OptimizeOptions opt;
    auto* c_opt = app.add_subcommand("optimize", "Find the read time and threshold maximising F_M");
    add_device(c_opt, opt.device);
    c_opt->add_option("--n-mc", opt.n_mc, "Monte Carlo shots per spin state")->capture_default_str();
    c_opt->add_option("--grid-points", opt.grid_points, "Initial read-time grid size")->capture_default_str();

    FitScalingOptions fit;
    auto* c_fit = app.add_subcommand("fit-scaling", "Fit V_M = k / d^alpha");
    c_fit->add_option("--data", fit.data, "CSV with d_nm and vm_mV columns (default: built-in shifts)");
    c_fit->add_option("--geometry", fit.geometry, "Fit a BEM map over the geometry's analysis box");
    c_fit->add_option("--spacing", fit.spacing, "Map grid spacing, nm")->capture_default_str();
    c_fit->add_option("--alpha", fit.alpha, "Hold alpha fixed and fit the prefactor only");

    RangeOptions rng;
    auto* c_rng = app.add_subcommand("range", "Readout fidelity against qubit distance");
    add_device(c_rng, rng.device);
    c_rng->add_option("--alpha", rng.alpha, "Power-law exponent")->capture_default_str();
    c_rng->add_option("--prefactor", rng.prefactor, "Power-law prefactor, mV nm^alpha (default: fit to data)");
    c_rng->add_option("--data", rng.data, "Shift CSV for the prefactor fit");
    c_rng->add_option("--calibrate-distance", rng.calibrate_distance,
                      "Set the peak FWHM so the --calibrate-alpha curve crosses --level here, nm");
    c_rng->add_option("--calibrate-alpha", rng.calibrate_alpha)->capture_default_str();
    c_rng->add_option("--level", rng.level, "Fidelity level for the crossing")->capture_default_str();
    c_rng->add_option("--d-min", rng.d_min)->capture_default_str();
    c_rng->add_option("--d-max", rng.d_max)->capture_default_str();
    c_rng->add_option("--d-step", rng.d_step)->capture_default_str();
    c_rng->add_option("--n-mc", rng.n_mc)->capture_default_str();

    FieldMapOptions fm;
    auto* c_fm = app.add_subcommand("field-map", "BEM map of the sensor shift V_M");
    c_fm->add_option("--geometry", fm.geometry, "Device geometry JSON")->required();
    c_fm->add_option("--grid", fm.grid, "x0 y0 spacing nx ny")->expected(5);
    c_fm->add_option("--spacing", fm.spacing, "Spacing of the default grid, nm")->capture_default_str();
    c_fm->add_option("--source", fm.source, "Sensor dot label (default: first sensor dot)");
    c_fm->add_option("--calibrate-site", fm.calibrate_site, "Scale the map so this site reads --measured-mv");
    c_fm->add_option("--calibrate-point", fm.calibrate_point, "x y; as --calibrate-site at a point")->expected(2);
    c_fm->add_option("--measured-mv", fm.measured_mv)->capture_default_str();
    c_fm->add_option("--scale-geometry", fm.scale_geometry, "Take the scale from a site of another geometry");
    c_fm->add_option("--scale-site", fm.scale_site)->capture_default_str();
    c_fm->add_option("--fraction", fm.fraction, "Strong-response peak fraction")->capture_default_str();
    c_fm->add_option("--fwhm", fm.fwhm, "Peak FWHM for the strong-response contour, mV");

    PlanOptions plan;
    auto* c_plan = app.add_subcommand("plan-array", "Count the qubits one sensor reads above a fidelity threshold");
    add_device(c_plan, plan.device);
    c_plan->add_option("--n-qubits", plan.n_qubits)->capture_default_str();
    c_plan->add_option("--pitch", plan.pitch, "nm")->capture_default_str();
    c_plan->add_option("--array", plan.array, "linear-1xN or split-2xN")->capture_default_str();
    c_plan->add_option("--sensor-position", plan.sensor_position, "Offset from the array centre, nm");
    c_plan->add_option("--sensor-standoff", plan.sensor_standoff, "Perpendicular distance, nm");
    c_plan->add_option("--row-spacing", plan.row_spacing, "2xN row spacing, nm (0 = pitch)");
    c_plan->add_option("--alpha", plan.alpha, "Power-law exponent (default 1.4)");
    c_plan->add_option("--prefactor", plan.prefactor, "Power-law prefactor, mV nm^alpha");
    c_plan->add_option("--map", plan.map, "Array geometry JSON; use a BEM map instead of the power law");
    c_plan->add_option("--map-spacing", plan.map_spacing)->capture_default_str();
    c_plan->add_option("--calibration-geometry", plan.calibration_geometry,
                       "Geometry whose measured site sets the map scale");
    c_plan->add_option("--calibration-site", plan.calibration_site)->capture_default_str();
    c_plan->add_option("--calibration-mv", plan.calibration_mv)->capture_default_str();
    c_plan->add_option("--threshold", plan.threshold)->capture_default_str();
    c_plan->add_option("--n-mc", plan.n_mc)->capture_default_str();
    c_plan->add_flag("--literature", plan.literature, "Geometric site count within the sensor range");
    c_plan->add_option("--range-nm", plan.range_nm, "Sensor range for --literature, nm");

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    g.out_dir = out_dir;
    slqd::set_thread_cap(g.threads);

    nlohmann::json summary;
    if (*c_presets) summary = run_presets(g, presets);
    else if (*c_sim) summary = run_simulate(g, sim);
    else if (*c_an) summary = run_analyze(g, an);
    else if (*c_opt) summary = run_optimize(g, opt);
    else if (*c_fit) summary = run_fit_scaling(g, fit);
    else if (*c_rng) summary = run_range(g, rng);
    else if (*c_fm) summary = run_field_map(g, fm);
    else if (*c_plan) summary = run_plan(g, plan);
    std::cout << summary.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const slqd::UsageError& e) {
        std::cerr << "slqd: usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "slqd: error: " << e.what() << '\n';
        return 1;
    }
}
