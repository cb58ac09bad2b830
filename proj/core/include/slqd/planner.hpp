#pragma once

// How many qubits of a linear or split 2xN array one sensor can read above a
// fidelity threshold, using either a V_M(d) power law or a BEM V_M map.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "slqd/electrostatics.hpp"
#include "slqd/readout.hpp"
#include "slqd/sensing.hpp"

namespace slqd {

enum class ArrayGeometry { linear_1xN, split_2xN };

// Qubits sit on a lattice centred on the origin: a single row along x for
// 1xN, two rows at y = +-row_spacing / 2 for 2xN. The sensor sits at
// (sensor_position, -sensor_standoff) for the power-law path; a BEM map
// carries its own sensor location.
struct ArraySpec {
    std::size_t n_qubits = 20;
    double pitch = 30.0;  // nm
    ArrayGeometry geometry = ArrayGeometry::linear_1xN;
    double sensor_position = 0.0;  // nm along the array from its centre
    double sensor_standoff = 0.0;  // nm perpendicular to the array
    double row_spacing = 0.0;      // nm, 2xN only; 0 means equal to pitch
};

void validate(const ArraySpec& a);
std::vector<Point2> qubit_positions(const ArraySpec& a);
Point2 sensor_location(const ArraySpec& a);

struct QubitPlan {
    std::size_t index = 0;
    Point2 position;
    double distance_nm = 0.0;  // to the sensor
    double v_m = 0.0;          // mV
    double contrast = 0.0;     // signal units
    Estimate f_m;
    double t_opt = 0.0;
    bool readable = false;
};

struct PlanReport {
    std::vector<QubitPlan> qubits;
    std::size_t readable_count = 0;
    double threshold = 0.9;
    std::string vm_source;  // "scaling-fit" or "bem-map"
};

using VmSource = std::variant<ScalingFit, VmMap>;

// Per-qubit V_M from the source, F_M from the optimised readout at the
// corresponding contrast. threshold must lie in (0.5, 1).
PlanReport plan_array(const ArraySpec& spec, const QubitParams& q, const SensorParams& s,
                      const VmSource& source, double threshold, std::size_t n_mc,
                      std::uint64_t seed, const OptimizerOptions& opts = {});

// Geometric count of sites within `sensor_range_nm`. 1xN: sensor at the array
// centre between sites, sites at (k + 1/2) pitch. 2xN: sensor replaces the
// head site of one row, sites at (i pitch, j row_spacing). At least 1.
std::size_t literature_row(double scaling_alpha, double pitch, ArrayGeometry geometry,
                           double sensor_range_nm, double row_spacing = 0.0);

// Distance at which an anchored power law falls to `vm_threshold_mv`:
// anchor_d * (anchor_vm / vm_threshold)^(1 / alpha).
double sensor_range_for_alpha(double alpha, double vm_threshold_mv, double anchor_distance_nm,
                              double anchor_vm_mv);

std::string to_string(ArrayGeometry g);
ArrayGeometry array_geometry_from_string(std::string_view s);

void to_json(nlohmann::json& j, const ArraySpec& a);
void from_json(const nlohmann::json& j, ArraySpec& a);
void to_json(nlohmann::json& j, const PlanReport& r);
// Header: index,x_nm,y_nm,d_nm,vm_mV,contrast,f_m,f_m_err,readable
void write_plan_csv(const PlanReport& r, std::ostream& os);

}  // namespace slqd
