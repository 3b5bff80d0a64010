#pragma once

// Command-line front end. `run` is the whole program minus process exit so
// tests can drive it in-process.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "repspace/centers.hpp"

namespace repspace::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// args excludes the program name. Returns the process exit code; errors are
/// written to `err` as one line of JSON.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
/// Hex FNV-1a of the compact sorted-key serialization.
std::string config_hash(const nlohmann::json& config);

nlohmann::json centers_to_json(const ClassCenterSet& centers);
ClassCenterSet centers_from_json(const nlohmann::json& j);
ClassCenterSet read_centers(const std::filesystem::path& path);

/// Table-shaped comparison of the runs under `dir`: each subdirectory holding a
/// manifest.json contributes its last snapshot, and loose .rsd files contribute
/// themselves. Rows are ordered none, label_smoothing, mixup, coordmix, other.
nlohmann::json report(const std::filesystem::path& dir, double feature_epsilon);

}  // namespace repspace::cli
