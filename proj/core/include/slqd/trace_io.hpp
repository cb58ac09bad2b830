#pragma once

// Ensemble archive: a little-endian float32 sample file plus a JSON sidecar
// holding parameters, seeds, read-window indices and ground truth.

#include <filesystem>
#include <iosfwd>

#include "json.hpp"
#include "slqd/tracegen.hpp"

namespace slqd {

inline constexpr int kEnsembleFormatVersion = 1;

void to_json(nlohmann::json& j, const SpinEvents& v);
void from_json(const nlohmann::json& j, SpinEvents& v);

// Sidecar document for `e`; `data_file` is the sample file name it references.
nlohmann::json ensemble_sidecar(const Ensemble& e, const std::string& data_file);

// Writes <stem>.bin and <stem>.json into `dir`. Returns the sidecar path.
std::filesystem::path write_ensemble(const Ensemble& e, const std::filesystem::path& dir,
                                     const std::string& stem = "ensemble");

// Reads an ensemble from its sidecar; the sample file is resolved relative to
// the sidecar's directory. Throws IoError / ValidationError.
Ensemble read_ensemble(const std::filesystem::path& sidecar);

// CSV with header "time_s,signal".
void write_trace_csv(const Trace& t, std::ostream& os);
void write_trace_csv(const Trace& t, const std::filesystem::path& path);

}  // namespace slqd
