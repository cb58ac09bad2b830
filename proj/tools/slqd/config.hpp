#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace slqd::cli {

// Expands `--config file.json` into ordinary flags. Top-level keys name long
// options ("shots": 5000 becomes --shots 5000, true becomes a bare flag, an
// array repeats the option); a "command" key supplies the subcommand when
// none is given. Flags already on the command line win.
std::vector<std::string> expand_config(const std::vector<std::string>& args,
                                       const std::vector<std::string>& commands);

// Options shared by every subcommand.
struct GlobalOptions {
    unsigned threads = 0;
    std::optional<std::uint64_t> seed;
    std::filesystem::path out_dir = ".";
    std::string config;
};

// Seed from --seed or a fresh one from the OS; the caller records it.
std::uint64_t resolve_seed(const GlobalOptions& g);

// Writes pretty JSON followed by a newline. Throws IoError.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace slqd::cli
