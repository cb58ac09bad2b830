#include "slqd/electrostatics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "slqd/errors.hpp"
#include "slqd/model.hpp"
#include "slqd/parallel.hpp"

namespace slqd {

namespace {

// Beyond this many panel diagonals a panel is treated as a point charge.
constexpr double kFarField = 6.0;
constexpr double kMinRcond = 1e-14;

// Antiderivative of 1/sqrt(u^2 + v^2) over du dv, with the ln|u| and ln|v|
// pieces dropped because they cancel between opposite corners.
double corner_term(double u, double v) {
    double f = 0.0;
    if (u != 0.0) f += u * std::asinh(v / std::abs(u));
    if (v != 0.0) f += v * std::asinh(u / std::abs(v));
    return f;
}

// Integral of 1/|p - r'| over the rectangle, p in the same plane (nm).
double rect_integral(const Rect& r, Point2 p) {
    const double u0 = r.x0 - p.x, u1 = r.x1 - p.x;
    const double v0 = r.y0 - p.y, v1 = r.y1 - p.y;
    return corner_term(u1, v1) - corner_term(u0, v1) - corner_term(u1, v0) +
           corner_term(u0, v0);
}

// Potential at p per unit charge uniformly spread on the panel, in units of
// 1/nm (multiply by the Coulomb constant / eps_r for volts per electron).
double influence(const Rect& r, Point2 p) {
    const Point2 c = r.center();
    const double dist = std::hypot(p.x - c.x, p.y - c.y);
    const double diag = std::hypot(r.width(), r.height());
    if (dist > kFarField * diag) return 1.0 / dist;
    return rect_integral(r, p) / (r.width() * r.height());
}

bool interiors_overlap(const Rect& a, const Rect& b) {
    return a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1;
}

std::vector<Panel> discretize(const DeviceGeometry& g) {
    std::vector<Panel> panels;
    for (std::size_t c = 0; c < g.conductors.size(); ++c) {
        const Conductor& cond = g.conductors[c];
        if (cond.role == ConductorRole::qubit_site) continue;
        const Rect& r = cond.rect;
        const auto nx = static_cast<std::size_t>(std::max(1.0, std::ceil(r.width() / g.panel_size - 1e-9)));
        const auto ny = static_cast<std::size_t>(std::max(1.0, std::ceil(r.height() / g.panel_size - 1e-9)));
        const double dx = r.width() / static_cast<double>(nx);
        const double dy = r.height() / static_cast<double>(ny);
        for (std::size_t iy = 0; iy < ny; ++iy) {
            for (std::size_t ix = 0; ix < nx; ++ix) {
                Rect p{r.x0 + dx * static_cast<double>(ix), r.y0 + dy * static_cast<double>(iy),
                       ix + 1 == nx ? r.x1 : r.x0 + dx * static_cast<double>(ix + 1),
                       iy + 1 == ny ? r.y1 : r.y0 + dy * static_cast<double>(iy + 1)};
                panels.push_back({p, c});
            }
        }
    }
    return panels;
}

std::size_t find_conductor(const DeviceGeometry& g, std::string_view label) {
    for (std::size_t i = 0; i < g.conductors.size(); ++i)
        if (g.conductors[i].label == label) return i;
    throw NotFoundError("no conductor labelled '" + std::string(label) + "'");
}

std::string default_source(const DeviceGeometry& g) {
    for (const auto& c : g.conductors)
        if (c.role == ConductorRole::sensor_dot) return c.label;
    throw DomainError("geometry has no sensor-dot conductor");
}

Rect rect_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 4) throw ValidationError("rect must be [x0, y0, x1, y1]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

double bilinear(const GridSpec& g, const std::vector<double>& v, Point2 p) {
    if (g.nx == 0 || g.ny == 0 || v.size() != g.nx * g.ny)
        throw ValidationError("map values do not match the grid");
    const double fx = (p.x - g.x0) / g.spacing;
    const double fy = (p.y - g.y0) / g.spacing;
    const double max_x = static_cast<double>(g.nx - 1);
    const double max_y = static_cast<double>(g.ny - 1);
    constexpr double eps = 1e-9;
    if (fx < -eps || fy < -eps || fx > max_x + eps || fy > max_y + eps)
        throw DomainError("point outside the map grid");
    const double cx = std::clamp(fx, 0.0, max_x);
    const double cy = std::clamp(fy, 0.0, max_y);
    const auto ix = std::min<std::size_t>(static_cast<std::size_t>(cx), g.nx > 1 ? g.nx - 2 : 0);
    const auto iy = std::min<std::size_t>(static_cast<std::size_t>(cy), g.ny > 1 ? g.ny - 2 : 0);
    const double tx = g.nx > 1 ? cx - static_cast<double>(ix) : 0.0;
    const double ty = g.ny > 1 ? cy - static_cast<double>(iy) : 0.0;
    const std::size_t ix1 = g.nx > 1 ? ix + 1 : ix;
    const std::size_t iy1 = g.ny > 1 ? iy + 1 : iy;
    const double v00 = v[iy * g.nx + ix], v10 = v[iy * g.nx + ix1];
    const double v01 = v[iy1 * g.nx + ix], v11 = v[iy1 * g.nx + ix1];
    return (1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10 + (1 - tx) * ty * v01 + tx * ty * v11;
}

}  // namespace

double Rect::distance_to(Point2 p) const {
    const double dx = std::max({x0 - p.x, 0.0, p.x - x1});
    const double dy = std::max({y0 - p.y, 0.0, p.y - y1});
    return std::hypot(dx, dy);
}

const Conductor& DeviceGeometry::conductor(std::string_view label) const {
    return conductors[find_conductor(*this, label)];
}

void validate(const DeviceGeometry& g) {
    if (!(g.eps_r > 1.0)) throw ValidationError("eps_r must exceed 1");
    if (!(g.lever_arm > 0.0 && g.lever_arm <= 1.0))
        throw ValidationError("lever_arm must lie in (0, 1]");
    if (!(g.panel_size > 0.0)) throw ValidationError("panel_size must be positive");
    for (std::size_t i = 0; i < g.conductors.size(); ++i) {
        const auto& a = g.conductors[i];
        if (a.label.empty()) throw ValidationError("conductor label must not be empty");
        if (!(a.rect.x1 > a.rect.x0 && a.rect.y1 > a.rect.y0))
            throw ValidationError("conductor '" + a.label + "' has a degenerate rectangle");
        for (std::size_t k = 0; k < i; ++k) {
            const auto& b = g.conductors[k];
            if (a.label == b.label) throw ValidationError("duplicate conductor label '" + a.label + "'");
            if (interiors_overlap(a.rect, b.rect))
                throw ValidationError("conductors '" + b.label + "' and '" + a.label + "' overlap");
        }
    }
    if (g.analysis_box) {
        const Rect& r = g.analysis_box->rect;
        if (!(r.x1 > r.x0 && r.y1 > r.y0)) throw ValidationError("analysis box is degenerate");
        if (g.analysis_box->exclusion_nm < 0.0)
            throw ValidationError("analysis box exclusion must be non-negative");
    }
}

ChargeSolution::ChargeSolution(const DeviceGeometry& g, std::string_view source, unsigned threads)
    : geometry_(g) {
    validate(geometry_);
    source_ = find_conductor(geometry_, source);
    if (geometry_.conductors[source_].role != ConductorRole::sensor_dot)
        throw DomainError("source '" + std::string(source) + "' is not a sensor-dot conductor");

    panels_ = discretize(geometry_);
    const std::size_t n = panels_.size();

    // Floating conductors (sensor dots) get an unknown potential and a
    // total-charge constraint; grounded gates sit at 0 V.
    std::vector<std::ptrdiff_t> floating_slot(geometry_.conductors.size(), -1);
    std::size_t n_float = 0;
    for (std::size_t c = 0; c < geometry_.conductors.size(); ++c)
        if (geometry_.conductors[c].role == ConductorRole::sensor_dot)
            floating_slot[c] = static_cast<std::ptrdiff_t>(n_float++);

    const std::size_t dim = n + n_float;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                              static_cast<Eigen::Index>(dim));
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));

    parallel_for(n, threads, [&](std::size_t i) {
        const Point2 ci = panels_[i].rect.center();
        const auto row = static_cast<Eigen::Index>(i);
        for (std::size_t j = 0; j < n; ++j)
            a(row, static_cast<Eigen::Index>(j)) = influence(panels_[j].rect, ci);
        const auto slot = floating_slot[panels_[i].conductor];
        if (slot >= 0) a(row, static_cast<Eigen::Index>(n) + slot) = -1.0;
    });
    for (std::size_t j = 0; j < n; ++j) {
        const auto slot = floating_slot[panels_[j].conductor];
        if (slot >= 0) a(static_cast<Eigen::Index>(n) + slot, static_cast<Eigen::Index>(j)) = 1.0;
    }
    b(static_cast<Eigen::Index>(n) + floating_slot[source_]) = 1.0;

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    const double rcond = lu.rcond();
    if (!(rcond > kMinRcond))
        throw SolverError("panel system is singular (rcond " + std::to_string(rcond) + ")");
    const Eigen::VectorXd x = lu.solve(b);
    if (!x.allFinite()) throw SolverError("panel solve produced non-finite charges");

    const double scale = constants::kCoulombVoltNm / geometry_.eps_r;
    charges_.assign(x.data(), x.data() + n);
    conductor_potentials_.assign(geometry_.conductors.size(), 0.0);
    for (std::size_t c = 0; c < geometry_.conductors.size(); ++c)
        if (floating_slot[c] >= 0)
            conductor_potentials_[c] = scale * x(static_cast<Eigen::Index>(n) + floating_slot[c]);
}

bool ChargeSolution::inside_conductor(Point2 p) const {
    return std::any_of(geometry_.conductors.begin(), geometry_.conductors.end(), [&](const Conductor& c) {
        return c.role != ConductorRole::qubit_site && c.rect.contains(p);
    });
}

double ChargeSolution::free_potential(Point2 p) const {
    double sum = 0.0;
    for (std::size_t j = 0; j < panels_.size(); ++j) sum += charges_[j] * influence(panels_[j].rect, p);
    return sum * constants::kCoulombVoltNm / geometry_.eps_r;
}

double ChargeSolution::potential(Point2 p) const {
    for (std::size_t c = 0; c < geometry_.conductors.size(); ++c) {
        const Conductor& cond = geometry_.conductors[c];
        if (cond.role != ConductorRole::qubit_site && cond.rect.contains(p))
            return conductor_potentials_[c];
    }
    return free_potential(p);
}

double ChargeSolution::conductor_potential(std::string_view label) const {
    const std::size_t c = find_conductor(geometry_, label);
    if (geometry_.conductors[c].role == ConductorRole::qubit_site)
        return free_potential(geometry_.conductors[c].rect.center());
    return conductor_potentials_[c];
}

double solve_mutual_energy(const DeviceGeometry& g, std::string_view source, Point2 target,
                           unsigned threads) {
    for (const auto& c : g.conductors)
        if (c.role != ConductorRole::qubit_site && c.rect.contains(target))
            throw DomainError("target lies inside conductor '" + c.label + "'");
    const ChargeSolution sol(g, source, threads);
    return 1e3 * sol.potential(target);
}

double solve_mutual_energy(const DeviceGeometry& g, std::string_view source,
                           std::string_view target, unsigned threads) {
    const std::size_t t = find_conductor(g, target);
    if (g.conductors[t].role == ConductorRole::gate_grounded)
        throw DomainError("target '" + std::string(target) + "' is a grounded gate");
    if (target == source) throw DomainError("source and target must differ");
    const ChargeSolution sol(g, source, threads);
    return 1e3 * sol.conductor_potential(target);
}

Point2 VmMap::node(std::size_t ix, std::size_t iy) const {
    return {grid.x0 + grid.spacing * static_cast<double>(ix),
            grid.y0 + grid.spacing * static_cast<double>(iy)};
}

double VmMap::value_at(Point2 p) const { return bilinear(grid, values, p); }
double VmMap::raw_value_at(Point2 p) const { return bilinear(grid, raw, p); }

VmMap vm_map(const DeviceGeometry& g, const GridSpec& grid, std::string_view source,
             unsigned threads) {
    if (!(grid.spacing > 0.0)) throw DomainError("grid spacing must be positive");
    if (grid.nx == 0 || grid.ny == 0) throw DomainError("grid must have at least one node");
    const std::string src = source.empty() ? default_source(g) : std::string(source);
    const ChargeSolution sol(g, src, threads);

    VmMap m;
    m.grid = grid;
    m.source = src;
    m.source_center = g.conductor(src).rect.center();
    m.lever_arm = g.lever_arm;
    m.raw.assign(grid.nx * grid.ny, 0.0);
    // meV of one electron divided by the lever arm gives gate mV.
    const double to_mv = 1e3 / g.lever_arm;
    parallel_for(grid.ny, threads, [&](std::size_t iy) {
        for (std::size_t ix = 0; ix < grid.nx; ++ix)
            m.raw[iy * grid.nx + ix] = std::max(0.0, sol.potential(m.node(ix, iy)) * to_mv);
    });
    m.values = m.raw;
    return m;
}

VmMap calibrate(const VmMap& map, Point2 reference, double measured_mv) {
    if (!(measured_mv > 0.0)) throw DomainError("measured V_M must be positive");
    const double current = map.value_at(reference);
    if (!(current > 0.0)) throw DomainError("map value at the reference point is zero");
    const double factor = measured_mv / current;
    VmMap out = map;
    for (double& v : out.values) v *= factor;
    const double prior = map.calibration ? map.calibration->scale : 1.0;
    out.calibration = MapCalibration{reference, measured_mv, prior * factor, "point"};
    return out;
}

double site_calibration_scale(const DeviceGeometry& reference, std::string_view site,
                              double measured_mv, unsigned threads) {
    if (!(measured_mv > 0.0)) throw DomainError("measured V_M must be positive");
    const Conductor& c = reference.conductor(site);
    if (c.role != ConductorRole::qubit_site)
        throw DomainError("calibration site '" + std::string(site) + "' is not a qubit site");
    const Point2 p = c.rect.center();
    const VmMap m = vm_map(reference, GridSpec{p.x, p.y, 1.0, 1, 1}, {}, threads);
    if (!(m.raw[0] > 0.0)) throw DomainError("reference map value at the site is zero");
    return measured_mv / m.raw[0];
}

VmMap apply_calibration_scale(const VmMap& map, double scale, std::string origin) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("calibration scale must be positive");
    if (map.raw.size() != map.grid.nx * map.grid.ny)
        throw ValidationError("map raw values do not match the grid");
    VmMap out = map;
    out.values.resize(out.raw.size());
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = out.raw[i] * scale;
    out.calibration = MapCalibration{std::nullopt, 0.0, scale, std::move(origin)};
    return out;
}

std::vector<DistanceSample> analysis_samples(const VmMap& map, const DeviceGeometry& g,
                                             std::string_view sensor) {
    if (!g.analysis_box) throw DomainError("geometry defines no analysis box");
    const AnalysisBox& box = *g.analysis_box;
    const std::string src = sensor.empty() ? map.source : std::string(sensor);
    const Point2 centre = g.conductor(src).rect.center();

    std::vector<DistanceSample> out;
    for (std::size_t iy = 0; iy < map.grid.ny; ++iy) {
        for (std::size_t ix = 0; ix < map.grid.nx; ++ix) {
            const Point2 p = map.node(ix, iy);
            if (!box.rect.contains(p)) continue;
            const bool near = std::any_of(g.conductors.begin(), g.conductors.end(), [&](const Conductor& c) {
                return c.role != ConductorRole::qubit_site && c.rect.distance_to(p) < box.exclusion_nm;
            });
            if (near) continue;
            const double v = map.at(ix, iy);
            if (v > 0.0) out.push_back({std::hypot(p.x - centre.x, p.y - centre.y), v});
        }
    }
    return out;
}

std::string to_string(ConductorRole r) {
    switch (r) {
        case ConductorRole::gate_grounded: return "gate-grounded";
        case ConductorRole::sensor_dot: return "sensor-dot";
        case ConductorRole::qubit_site: return "qubit-site";
    }
    return "unknown";
}

ConductorRole conductor_role_from_string(std::string_view s) {
    if (s == "gate-grounded") return ConductorRole::gate_grounded;
    if (s == "sensor-dot") return ConductorRole::sensor_dot;
    if (s == "qubit-site") return ConductorRole::qubit_site;
    throw ValidationError("unknown conductor role '" + std::string(s) +
                          "' (expected gate-grounded, sensor-dot or qubit-site)");
}

void to_json(nlohmann::json& j, const DeviceGeometry& g) {
    nlohmann::json conductors = nlohmann::json::array();
    for (const auto& c : g.conductors)
        conductors.push_back({{"label", c.label},
                              {"role", to_string(c.role)},
                              {"rect", {c.rect.x0, c.rect.y0, c.rect.x1, c.rect.y1}}});
    j = {{"name", g.name},
         {"eps_r", g.eps_r},
         {"lever_arm", g.lever_arm},
         {"plane_z", g.plane_z},
         {"panel_size", g.panel_size},
         {"approximate", g.approximate},
         {"conductors", std::move(conductors)}};
    if (g.analysis_box) {
        const Rect& r = g.analysis_box->rect;
        j["analysis_box"] = {{"rect", {r.x0, r.y0, r.x1, r.y1}},
                             {"exclusion_nm", g.analysis_box->exclusion_nm}};
    }
}

void from_json(const nlohmann::json& j, DeviceGeometry& g) {
    try {
        g = DeviceGeometry{};
        g.name = j.value("name", std::string{});
        g.eps_r = j.value("eps_r", constants::kSiliconPermittivity);
        g.lever_arm = j.at("lever_arm").get<double>();
        g.plane_z = j.value("plane_z", 0.0);
        g.panel_size = j.value("panel_size", 2.0);
        g.approximate = j.value("approximate", false);
        for (const auto& jc : j.at("conductors")) {
            g.conductors.push_back({jc.at("label").get<std::string>(), rect_from_json(jc.at("rect")),
                                    conductor_role_from_string(jc.at("role").get<std::string>())});
        }
        if (j.contains("analysis_box") && !j.at("analysis_box").is_null()) {
            const auto& jb = j.at("analysis_box");
            g.analysis_box = AnalysisBox{rect_from_json(jb.at("rect")), jb.value("exclusion_nm", 10.0)};
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("invalid geometry document: ") + ex.what());
    }
    validate(g);
}

void to_json(nlohmann::json& j, const GridSpec& g) {
    j = {{"x0", g.x0}, {"y0", g.y0}, {"spacing", g.spacing}, {"nx", g.nx}, {"ny", g.ny}};
}

void from_json(const nlohmann::json& j, GridSpec& g) {
    try {
        g.x0 = j.at("x0").get<double>();
        g.y0 = j.at("y0").get<double>();
        g.spacing = j.at("spacing").get<double>();
        g.nx = j.at("nx").get<std::size_t>();
        g.ny = j.at("ny").get<std::size_t>();
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("invalid grid spec: ") + ex.what());
    }
    if (!(g.spacing > 0.0) || g.nx == 0 || g.ny == 0)
        throw ValidationError("grid needs positive spacing and at least one node per axis");
}

nlohmann::json map_metadata(const VmMap& m) {
    nlohmann::json cal = nullptr;
    if (m.calibration)
        cal = {{"reference", m.calibration->reference
                                 ? nlohmann::json{m.calibration->reference->x, m.calibration->reference->y}
                                 : nlohmann::json(nullptr)},
               {"measured_mv", m.calibration->measured_mv},
               {"scale", m.calibration->scale},
               {"origin", m.calibration->origin}};
    const auto [lo, hi] = std::minmax_element(m.values.begin(), m.values.end());
    return {{"grid", m.grid},
            {"source", m.source},
            {"source_center", {m.source_center.x, m.source_center.y}},
            {"lever_arm", m.lever_arm},
            {"calibration", cal},
            {"value_min_mv", m.values.empty() ? 0.0 : *lo},
            {"value_max_mv", m.values.empty() ? 0.0 : *hi}};
}

void write_map_csv(const VmMap& m, std::ostream& os) {
    os << "x_nm,y_nm,vm_mV,vm_raw_mV\n";
    os << std::setprecision(10);
    for (std::size_t iy = 0; iy < m.grid.ny; ++iy)
        for (std::size_t ix = 0; ix < m.grid.nx; ++ix) {
            const Point2 p = m.node(ix, iy);
            os << p.x << ',' << p.y << ',' << m.values[iy * m.grid.nx + ix] << ','
               << m.raw[iy * m.grid.nx + ix] << '\n';
        }
}

}  // namespace slqd
