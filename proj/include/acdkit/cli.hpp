#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "acdkit/acda.hpp"

namespace acdkit::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Entry point shared by the executable and the tests. Returns the exit status:
/// 0 success, 1 configuration error, 2 I/O failure, 3 numerical failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Hex SHA-256 of a file's contents.
std::string file_digest(const std::filesystem::path& path);

/// Applies `key=value` overrides; values parse as JSON when possible, else as strings.
void apply_overrides(nlohmann::json& config, const std::vector<std::string>& overrides);

/// Builds an ACDA configuration from the flat JSON config used by `detect` and `sweep`.
acda::AcdaConfig acda_config_from_json(const nlohmann::json& config);

/// Worker count from ACDKIT_THREADS, else hardware concurrency.
std::size_t default_threads();

}  // namespace acdkit::cli
