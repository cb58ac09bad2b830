#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "json.hpp"

namespace slqd::cli {

// Qubit and sensor come from --preset or a --params JSON file holding
// {"qubit": ..., "sensor": ..., "pulse": ...}.
struct DeviceOptions {
    std::string preset;
    std::string params;
    std::optional<double> fwhm;  // mV, overrides the sensor peak width
};

struct PresetsOptions {
    std::string name;
};

struct SimulateOptions {
    DeviceOptions device;
    long long shots = -1;
    double up_fraction = 0.5;
    std::optional<double> t_read;
    std::string stem = "ensemble";
    std::vector<std::size_t> trace_csv;
};

struct AnalyzeOptions {
    std::string ensemble;
    std::string preset;
    std::optional<double> threshold;
    std::optional<double> t_read;
};

struct OptimizeOptions {
    DeviceOptions device;
    std::size_t n_mc = 10000;
    std::size_t grid_points = 24;
};

struct FitScalingOptions {
    std::string data;
    std::string geometry;
    double spacing = 5.0;
    std::optional<double> alpha;
};

struct RangeOptions {
    DeviceOptions device;
    double alpha = 1.4;
    std::optional<double> prefactor;
    std::string data;
    std::optional<double> calibrate_distance;
    double calibrate_alpha = 1.4;
    double level = 0.9;
    double d_min = 10.0;
    double d_max = 400.0;
    double d_step = 10.0;
    std::size_t n_mc = 4000;
};

struct FieldMapOptions {
    std::string geometry;
    std::vector<double> grid;  // x0 y0 spacing nx ny
    double spacing = 5.0;
    std::string source;
    std::string calibrate_site;
    std::vector<double> calibrate_point;
    double measured_mv = 7.1;
    std::string scale_geometry;
    std::string scale_site = "D1";
    double fraction = 0.01;
    double fwhm = 0.0;
};

struct PlanOptions {
    DeviceOptions device;
    std::size_t n_qubits = 20;
    double pitch = 30.0;
    std::string array = "linear-1xN";
    double sensor_position = 0.0;
    double sensor_standoff = 0.0;
    double row_spacing = 0.0;
    std::optional<double> alpha;
    std::optional<double> prefactor;
    std::string map;
    double map_spacing = 5.0;
    std::string calibration_geometry;
    std::string calibration_site = "D1";
    double calibration_mv = 7.1;
    double threshold = 0.9;
    std::size_t n_mc = 4000;
    bool literature = false;
    std::optional<double> range_nm;
};

// Each command writes its artifacts under g.out_dir and returns the summary
// printed on stdout.
nlohmann::json run_presets(const GlobalOptions& g, const PresetsOptions& o);
nlohmann::json run_simulate(const GlobalOptions& g, const SimulateOptions& o);
nlohmann::json run_analyze(const GlobalOptions& g, const AnalyzeOptions& o);
nlohmann::json run_optimize(const GlobalOptions& g, const OptimizeOptions& o);
nlohmann::json run_fit_scaling(const GlobalOptions& g, const FitScalingOptions& o);
nlohmann::json run_range(const GlobalOptions& g, const RangeOptions& o);
nlohmann::json run_field_map(const GlobalOptions& g, const FieldMapOptions& o);
nlohmann::json run_plan(const GlobalOptions& g, const PlanOptions& o);

}  // namespace slqd::cli
