#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "slqd/errors.hpp"

namespace slqd::cli {

namespace {

std::string scalar_text(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    if (v.is_number_float()) return v.dump();
    throw UsageError("config values must be strings, numbers, booleans or arrays of those");
}

std::string option_name(const std::string& arg) {
    if (arg.rfind("--", 0) != 0) return {};
    const auto eq = arg.find('=');
    return arg.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
}

}  // namespace

std::vector<std::string> expand_config(const std::vector<std::string>& args,
                                       const std::vector<std::string>& commands) {
    std::optional<std::string> path;
    std::set<std::string> given;
    std::optional<std::size_t> command_at;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string name = option_name(args[i]);
        if (!name.empty()) given.insert(name);
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw UsageError("--config needs a file argument");
            path = args[i + 1];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else if (std::find(commands.begin(), commands.end(), args[i]) != commands.end()) {
            if (!command_at) command_at = i;
        }
    }
    if (!path) return args;

    nlohmann::json cfg;
    {
        std::ifstream in(*path);
        if (!in) throw UsageError("cannot open config file " + *path);
        try {
            in >> cfg;
        } catch (const nlohmann::json::exception& ex) {
            throw UsageError("config file " + *path + " is not valid JSON: " + ex.what());
        }
    }
    if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");

    // Config flags go right after the subcommand so they bind to it.
    std::vector<std::string> out;
    if (command_at) {
        out.assign(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(*command_at + 1));
    } else {
        if (!cfg.contains("command")) throw UsageError("no subcommand given on the command line or in the config");
        out.push_back(cfg.at("command").get<std::string>());
    }
    for (const auto& [key, value] : cfg.items()) {
        if (key == "command" || key == "config" || given.contains(key)) continue;
        const std::string flag = "--" + key;
        if (value.is_boolean()) {
            if (value.get<bool>()) out.push_back(flag);
        } else if (value.is_array()) {
            for (const auto& v : value) {
                out.push_back(flag);
                out.push_back(scalar_text(v));
            }
        } else if (!value.is_null()) {
            out.push_back(flag);
            out.push_back(scalar_text(value));
        }
    }
    const std::size_t rest = command_at ? *command_at + 1 : 0;
    out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(rest), args.end());
    return out;
}

std::uint64_t resolve_seed(const GlobalOptions& g) {
    if (g.seed) return *g.seed;
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    write_text(path, j.dump(2) + "\n");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) throw IoError("failed writing " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(path.string() + " is not valid JSON: " + ex.what());
    }
}

}  // namespace slqd::cli
