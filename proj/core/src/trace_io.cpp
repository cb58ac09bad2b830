#include "slqd/trace_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "slqd/errors.hpp"

namespace slqd {

namespace {

constexpr const char* kFormatName = "slqd-ensemble";

std::uint32_t to_le(std::uint32_t x) {
    if constexpr (std::endian::native == std::endian::big) {
        x = ((x & 0xFF) << 24) | ((x & 0xFF00) << 8) | ((x >> 8) & 0xFF00) | (x >> 24);
    }
    return x;
}

nlohmann::json optional_time(const std::optional<double>& t) {
    return t ? nlohmann::json(*t) : nlohmann::json(nullptr);
}

std::optional<double> read_optional_time(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

}  // namespace

void to_json(nlohmann::json& j, const SpinEvents& v) {
    j = {{"true_spin", v.true_spin == Spin::up ? "up" : "down"},
         {"relaxed_at", optional_time(v.relaxed_at)},
         {"tunnel_out_at", optional_time(v.tunnel_out_at)},
         {"tunnel_in_at", optional_time(v.tunnel_in_at)}};
}

void from_json(const nlohmann::json& j, SpinEvents& v) {
    const auto spin = j.at("true_spin").get<std::string>();
    if (spin != "up" && spin != "down") throw ValidationError("true_spin must be up or down");
    v.true_spin = spin == "up" ? Spin::up : Spin::down;
    v.relaxed_at = read_optional_time(j, "relaxed_at");
    v.tunnel_out_at = read_optional_time(j, "tunnel_out_at");
    v.tunnel_in_at = read_optional_time(j, "tunnel_in_at");
}

nlohmann::json ensemble_sidecar(const Ensemble& e, const std::string& data_file) {
    nlohmann::json traces = nlohmann::json::array();
    std::size_t offset = 0;
    for (std::size_t i = 0; i < e.traces.size(); ++i) {
        const Trace& t = e.traces[i];
        traces.push_back({{"index", i},
                          {"seed", t.seed},
                          {"offset", offset},
                          {"length", t.samples.size()},
                          {"sample_rate", t.sample_rate},
                          {"read_start_index", t.read_start_index},
                          {"read_end_index", t.read_end_index},
                          {"truth", t.truth}});
        offset += t.samples.size();
    }
    return {{"format", kFormatName},
            {"version", kEnsembleFormatVersion},
            {"sample_encoding", "float32-le"},
            {"data_file", data_file},
            {"seed_derivation",
             "trace seed = splitmix64(splitmix64(master_seed) + (index + 1) * "
             "0x9E3779B97F4A7C15); events use stream 0, noise stream 1 of the trace seed"},
            {"master_seed", e.master_seed},
            {"up_fraction", e.up_fraction},
            {"n_traces", e.traces.size()},
            {"qubit", e.qubit},
            {"sensor", e.sensor},
            {"pulse", e.pulse},
            {"traces", std::move(traces)}};
}

std::filesystem::path write_ensemble(const Ensemble& e, const std::filesystem::path& dir,
                                     const std::string& stem) {
    std::filesystem::create_directories(dir);
    const std::string data_name = stem + ".bin";
    const auto data_path = dir / data_name;
    const auto sidecar_path = dir / (stem + ".json");

    std::ofstream data(data_path, std::ios::binary | std::ios::trunc);
    if (!data) throw IoError("cannot open " + data_path.string() + " for writing");
    std::vector<std::uint32_t> buf;
    for (const Trace& t : e.traces) {
        buf.resize(t.samples.size());
        for (std::size_t i = 0; i < t.samples.size(); ++i)
            buf[i] = to_le(std::bit_cast<std::uint32_t>(t.samples[i]));
        data.write(reinterpret_cast<const char*>(buf.data()),
                   static_cast<std::streamsize>(buf.size() * sizeof(std::uint32_t)));
    }
    if (!data) throw IoError("failed writing " + data_path.string());

    std::ofstream side(sidecar_path, std::ios::trunc);
    if (!side) throw IoError("cannot open " + sidecar_path.string() + " for writing");
    side << ensemble_sidecar(e, data_name).dump(2) << '\n';
    if (!side) throw IoError("failed writing " + sidecar_path.string());
    return sidecar_path;
}

Ensemble read_ensemble(const std::filesystem::path& sidecar) {
    std::ifstream side(sidecar);
    if (!side) throw IoError("cannot open ensemble sidecar " + sidecar.string());
    nlohmann::json j;
    try {
        side >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError("malformed sidecar " + sidecar.string() + ": " + ex.what());
    }
    try {
        if (j.at("format").get<std::string>() != kFormatName)
            throw ValidationError("not an ensemble sidecar: " + sidecar.string());
        if (j.at("version").get<int>() != kEnsembleFormatVersion)
            throw ValidationError("unsupported ensemble format version");

        Ensemble e;
        j.at("qubit").get_to(e.qubit);
        j.at("sensor").get_to(e.sensor);
        j.at("pulse").get_to(e.pulse);
        e.master_seed = j.at("master_seed").get<std::uint64_t>();
        e.up_fraction = j.at("up_fraction").get<double>();

        const auto data_path = sidecar.parent_path() / j.at("data_file").get<std::string>();
        std::ifstream data(data_path, std::ios::binary);
        if (!data) throw IoError("cannot open sample file " + data_path.string());

        std::vector<std::uint32_t> buf;
        for (const auto& jt : j.at("traces")) {
            Trace t;
            const auto offset = jt.at("offset").get<std::size_t>();
            const auto length = jt.at("length").get<std::size_t>();
            t.seed = jt.at("seed").get<std::uint64_t>();
            t.sample_rate = jt.at("sample_rate").get<double>();
            t.read_start_index = jt.at("read_start_index").get<std::size_t>();
            t.read_end_index = jt.at("read_end_index").get<std::size_t>();
            jt.at("truth").get_to(t.truth);
            t.sensor = e.sensor;

            buf.resize(length);
            data.seekg(static_cast<std::streamoff>(offset * sizeof(std::uint32_t)));
            data.read(reinterpret_cast<char*>(buf.data()),
                      static_cast<std::streamsize>(length * sizeof(std::uint32_t)));
            if (!data) throw IoError("sample file truncated: " + data_path.string());
            t.samples.resize(length);
            for (std::size_t i = 0; i < length; ++i)
                t.samples[i] = std::bit_cast<float>(to_le(buf[i]));
            if (t.read_end_index > t.samples.size() || t.read_start_index > t.read_end_index)
                throw MalformedTraceError("trace read window out of bounds");
            e.traces.push_back(std::move(t));
        }
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError("sidecar schema mismatch in " + sidecar.string() + ": " + ex.what());
    }
}

void write_trace_csv(const Trace& t, std::ostream& os) {
    os << "time_s,signal\n";
    os << std::setprecision(9);
    for (std::size_t i = 0; i < t.samples.size(); ++i)
        os << t.time_of(i) << ',' << t.samples[i] << '\n';
}

void write_trace_csv(const Trace& t, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os.imbue(std::locale::classic());
    write_trace_csv(t, os);
}

}  // namespace slqd
