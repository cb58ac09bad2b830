#pragma once

// Boundary-element electrostatics for coplanar zero-thickness conductors in
// a uniform dielectric. One electron is placed on a sensor dot (grounded gates
// held at 0 V, other dots floating and neutral); the resulting potential at a
// qubit position is the sensor-qubit mutual charging energy E_M, and
// E_M / lever_arm is the sensor peak shift V_M in gate millivolts.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace slqd {

enum class ConductorRole { gate_grounded, sensor_dot, qubit_site };

struct Point2 {
    double x = 0.0;  // nm
    double y = 0.0;  // nm
};

struct Rect {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;  // nm, x0 < x1, y0 < y1

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    Point2 center() const { return {(x0 + x1) / 2.0, (y0 + y1) / 2.0}; }
    bool contains(Point2 p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
    double distance_to(Point2 p) const;
};

struct Conductor {
    std::string label;
    Rect rect;
    // Qubit sites mark target positions only and carry no panels.
    ConductorRole role = ConductorRole::gate_grounded;
};

// Region whose grid points feed the distance-scaling fit. Points closer than
// `exclusion_nm` to any conductor are dropped.
struct AnalysisBox {
    Rect rect;
    double exclusion_nm = 10.0;
};

struct DeviceGeometry {
    std::string name;
    std::vector<Conductor> conductors;
    double eps_r = 11.7;
    double lever_arm = 0.09;
    double plane_z = 0.0;     // nm; all conductors and targets share this plane
    double panel_size = 2.0;  // nm, target edge length of the square-ish panels
    std::optional<AnalysisBox> analysis_box;
    bool approximate = false;  // layout is representative, not measured

    const Conductor& conductor(std::string_view label) const;
};

// No overlaps, eps_r > 1, 0 < lever_arm <= 1, positive panel size and rects.
void validate(const DeviceGeometry& g);

struct Panel {
    Rect rect;
    std::size_t conductor = 0;
};

// Solved charge distribution for one electron on `source`.
class ChargeSolution {
public:
    ChargeSolution(const DeviceGeometry& g, std::string_view source, unsigned threads = 0);

    // Potential in volts at an in-plane point (inside a solved conductor the
    // conductor potential is returned).
    double potential(Point2 p) const;
    double conductor_potential(std::string_view label) const;
    bool inside_conductor(Point2 p) const;

    const std::vector<Panel>& panels() const { return panels_; }
    const std::vector<double>& panel_charges() const { return charges_; }
    const DeviceGeometry& geometry() const { return geometry_; }
    std::size_t source_index() const { return source_; }

private:
    double free_potential(Point2 p) const;

    DeviceGeometry geometry_;
    std::size_t source_ = 0;
    std::vector<Panel> panels_;
    std::vector<double> charges_;  // electrons per panel
    std::vector<double> conductor_potentials_;  // volts, per conductor
};

// Mutual charging energy in meV between one electron on `source` (a
// sensor-dot conductor) and an in-plane target point. Throws DomainError for
// a target inside a conductor, SolverError for a singular system.
double solve_mutual_energy(const DeviceGeometry& g, std::string_view source, Point2 target,
                           unsigned threads = 0);
// Target given as a conductor label: a sensor-dot target uses its floating
// potential, a qubit-site target its centre.
double solve_mutual_energy(const DeviceGeometry& g, std::string_view source,
                           std::string_view target, unsigned threads = 0);

struct GridSpec {
    double x0 = 0.0;  // nm, first node
    double y0 = 0.0;
    double spacing = 5.0;
    std::size_t nx = 1;
    std::size_t ny = 1;
};

struct MapCalibration {
    // Point calibrations record the reference; transferred scales record
    // where they came from instead.
    std::optional<Point2> reference;
    double measured_mv = 0.0;
    double scale = 1.0;  // cumulative factor applied to raw values
    std::string origin;
};

struct VmMap {
    GridSpec grid;
    std::vector<double> raw;     // mV before calibration, row-major [iy * nx + ix]
    std::vector<double> values;  // mV after calibration
    std::optional<MapCalibration> calibration;
    std::string source;
    Point2 source_center;  // nm
    double lever_arm = 1.0;

    Point2 node(std::size_t ix, std::size_t iy) const;
    double at(std::size_t ix, std::size_t iy) const { return values[iy * grid.nx + ix]; }
    // Bilinear interpolation; DomainError outside the grid.
    double value_at(Point2 p) const;
    double raw_value_at(Point2 p) const;
};

// V_M map in mV: E_M / lever_arm on every grid node. `source` defaults to the
// first sensor-dot conductor.
VmMap vm_map(const DeviceGeometry& g, const GridSpec& grid, std::string_view source = {},
             unsigned threads = 0);

// Scales all values by measured / value_at(reference).
VmMap calibrate(const VmMap& map, Point2 reference, double measured_mv);

// measured / raw V_M at a qubit-site conductor of another geometry, for
// carrying one device's point calibration over to a related layout.
double site_calibration_scale(const DeviceGeometry& reference, std::string_view site,
                              double measured_mv, unsigned threads = 0);
// values = raw * scale.
VmMap apply_calibration_scale(const VmMap& map, double scale, std::string origin);

// (distance from the sensor centre, V_M) for every node in the analysis box.
struct DistanceSample {
    double distance_nm;
    double v_m_mv;
};
std::vector<DistanceSample> analysis_samples(const VmMap& map, const DeviceGeometry& g,
                                             std::string_view sensor = {});

std::string to_string(ConductorRole r);
ConductorRole conductor_role_from_string(std::string_view s);

void to_json(nlohmann::json& j, const DeviceGeometry& g);
void from_json(const nlohmann::json& j, DeviceGeometry& g);
void to_json(nlohmann::json& j, const GridSpec& g);
void from_json(const nlohmann::json& j, GridSpec& g);
// Metadata only (grid, calibration, source); values go to CSV.
nlohmann::json map_metadata(const VmMap& m);
void write_map_csv(const VmMap& m, std::ostream& os);

}  // namespace slqd
