#include "slqd/planner.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>

#include "slqd/errors.hpp"

namespace slqd {

namespace {

double effective_row_spacing(double pitch, double row_spacing) {
    return row_spacing > 0.0 ? row_spacing : pitch;
}

}  // namespace

void validate(const ArraySpec& a) {
    if (a.n_qubits < 1) throw ValidationError("array needs at least one qubit");
    if (!(a.pitch > 0.0)) throw ValidationError("pitch must be positive");
    if (!std::isfinite(a.sensor_position) || !std::isfinite(a.sensor_standoff))
        throw ValidationError("sensor placement must be finite");
    if (a.row_spacing < 0.0) throw ValidationError("row spacing must be non-negative");
    if (a.geometry == ArrayGeometry::split_2xN && a.n_qubits % 2 != 0)
        throw ValidationError("a 2xN array needs an even qubit count");
}

std::vector<Point2> qubit_positions(const ArraySpec& a) {
    validate(a);
    std::vector<Point2> out;
    if (a.geometry == ArrayGeometry::linear_1xN) {
        const double mid = 0.5 * static_cast<double>(a.n_qubits - 1);
        for (std::size_t k = 0; k < a.n_qubits; ++k)
            out.push_back({(static_cast<double>(k) - mid) * a.pitch, 0.0});
    } else {
        const std::size_t cols = a.n_qubits / 2;
        const double mid = 0.5 * static_cast<double>(cols - 1);
        const double half = 0.5 * effective_row_spacing(a.pitch, a.row_spacing);
        for (double y : {-half, half})
            for (std::size_t k = 0; k < cols; ++k)
                out.push_back({(static_cast<double>(k) - mid) * a.pitch, y});
    }
    return out;
}

Point2 sensor_location(const ArraySpec& a) { return {a.sensor_position, -a.sensor_standoff}; }

PlanReport plan_array(const ArraySpec& spec, const QubitParams& q, const SensorParams& s,
                      const VmSource& source, double threshold, std::size_t n_mc,
                      std::uint64_t seed, const OptimizerOptions& opts) {
    if (!(threshold > 0.5 && threshold < 1.0)) throw DomainError("threshold must lie in (0.5, 1)");
    validate(q);
    validate(s);
    const auto positions = qubit_positions(spec);

    PlanReport r;
    r.threshold = threshold;
    r.vm_source = std::holds_alternative<ScalingFit>(source) ? "scaling-fit" : "bem-map";

    Point2 sensor = sensor_location(spec);
    if (const auto* map = std::get_if<VmMap>(&source); map && map->calibration == std::nullopt)
        throw DomainError("BEM map must be calibrated before planning");

    // Symmetric arrays repeat V_M values; reuse the optimisation for those.
    std::map<double, FidelityReport> cache;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        QubitPlan p;
        p.index = i;
        p.position = positions[i];
        if (const auto* fit = std::get_if<ScalingFit>(&source)) {
            p.distance_nm = std::hypot(p.position.x - sensor.x, p.position.y - sensor.y);
            if (!(p.distance_nm > 0.0)) throw DomainError("a qubit coincides with the sensor");
            p.v_m = fit->v_m(p.distance_nm);
        } else {
            const VmMap& map = std::get<VmMap>(source);
            p.v_m = map.value_at(p.position);
            p.distance_nm = std::hypot(p.position.x - map.source_center.x,
                                       p.position.y - map.source_center.y);
        }
        p.contrast = contrast(s.peak, p.v_m);
        const double ratio = p.contrast / s.peak.height;
        auto it = cache.find(ratio);
        if (it == cache.end())
            it = cache.emplace(ratio, fidelity_at_contrast(q, s, ratio, n_mc, seed, opts)).first;
        p.f_m = it->second.f_m;
        p.t_opt = it->second.t_opt;
        p.readable = p.f_m.value >= threshold;
        if (p.readable) ++r.readable_count;
        r.qubits.push_back(p);
    }
    return r;
}

std::size_t literature_row(double scaling_alpha, double pitch, ArrayGeometry geometry,
                           double sensor_range_nm, double row_spacing) {
    if (!(scaling_alpha > 0.0) || !(pitch > 0.0) || !(sensor_range_nm > 0.0))
        throw DomainError("literature estimate needs positive inputs");
    std::size_t count = 0;
    if (geometry == ArrayGeometry::linear_1xN) {
        // Sites at +-(k + 1/2) pitch on both sides of the sensor.
        for (std::size_t k = 0;; ++k) {
            if ((static_cast<double>(k) + 0.5) * pitch > sensor_range_nm) break;
            count += 2;
        }
    } else {
        const double dy = effective_row_spacing(pitch, row_spacing);
        const auto max_i = static_cast<std::size_t>(sensor_range_nm / pitch);
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t i = 0; i <= max_i; ++i) {
                if (i == 0 && j == 0) continue;
                const double d = std::hypot(static_cast<double>(i) * pitch, static_cast<double>(j) * dy);
                if (d <= sensor_range_nm) ++count;
            }
    }
    return std::max<std::size_t>(1, count);
}

double sensor_range_for_alpha(double alpha, double vm_threshold_mv, double anchor_distance_nm,
                              double anchor_vm_mv) {
    if (!(alpha > 0.0) || !(vm_threshold_mv > 0.0) || !(anchor_distance_nm > 0.0) ||
        !(anchor_vm_mv > 0.0))
        throw DomainError("sensor range needs positive inputs");
    return anchor_distance_nm * std::pow(anchor_vm_mv / vm_threshold_mv, 1.0 / alpha);
}

std::string to_string(ArrayGeometry g) {
    return g == ArrayGeometry::linear_1xN ? "linear-1xN" : "split-2xN";
}

ArrayGeometry array_geometry_from_string(std::string_view s) {
    if (s == "linear-1xN") return ArrayGeometry::linear_1xN;
    if (s == "split-2xN") return ArrayGeometry::split_2xN;
    throw ValidationError("unknown array geometry '" + std::string(s) +
                          "' (expected linear-1xN or split-2xN)");
}

void to_json(nlohmann::json& j, const ArraySpec& a) {
    j = {{"n_qubits", a.n_qubits},
         {"pitch", a.pitch},
         {"geometry", to_string(a.geometry)},
         {"sensor_position", a.sensor_position},
         {"sensor_standoff", a.sensor_standoff},
         {"row_spacing", a.row_spacing}};
}

void from_json(const nlohmann::json& j, ArraySpec& a) {
    try {
        a = ArraySpec{};
        a.n_qubits = j.at("n_qubits").get<std::size_t>();
        a.pitch = j.at("pitch").get<double>();
        a.geometry = array_geometry_from_string(j.value("geometry", std::string("linear-1xN")));
        a.sensor_position = j.value("sensor_position", 0.0);
        a.sensor_standoff = j.value("sensor_standoff", 0.0);
        a.row_spacing = j.value("row_spacing", 0.0);
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("invalid array spec: ") + ex.what());
    }
    validate(a);
}

void to_json(nlohmann::json& j, const PlanReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& p : r.qubits) {
        rows.push_back({{"index", p.index},
                        {"x_nm", p.position.x},
                        {"y_nm", p.position.y},
                        {"distance_nm", p.distance_nm},
                        {"v_m", p.v_m},
                        {"contrast", p.contrast},
                        {"f_m", p.f_m.value},
                        {"f_m_err", p.f_m.err},
                        {"t_opt", p.t_opt},
                        {"readable", p.readable}});
    }
    j = {{"qubits", std::move(rows)},
         {"readable_count", r.readable_count},
         {"threshold", r.threshold},
         {"vm_source", r.vm_source}};
}

void write_plan_csv(const PlanReport& r, std::ostream& os) {
    os << "index,x_nm,y_nm,d_nm,vm_mV,contrast,f_m,f_m_err,readable\n";
    os << std::setprecision(10);
    for (const auto& p : r.qubits) {
        os << p.index << ',' << p.position.x << ',' << p.position.y << ',' << p.distance_nm
           << ',' << p.v_m << ',' << p.contrast << ',' << p.f_m.value << ',' << p.f_m.err << ','
           << (p.readable ? 1 : 0) << '\n';
    }
}

}  // namespace slqd
